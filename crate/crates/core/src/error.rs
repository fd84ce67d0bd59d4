use thiserror::Error;

/// Everything that can go wrong inside the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("diagonal entry {0} is missing or not positive")]
    NonPositiveDiagonal(usize),
    #[error("duplicate entry at ({0}, {1})")]
    DuplicateEntry(usize, usize),
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is neither row nor column diagonally dominant")]
    NotDominant,
    #[error("matrix is not row diagonally dominant")]
    NotRdd,
    #[error("matrix is not column diagonally dominant")]
    NotCdd,
    #[error("matrix is not both row and column diagonally dominant")]
    NotRcdd,
    #[error("matrix is not a row diagonally dominant Z-matrix")]
    NotRddz,
    #[error("matrix is not symmetric diagonally dominant")]
    NotSdd,
    #[error("input vector has a negative entry at {0}")]
    NegativeInput(usize),
    #[error("target vector t is zero")]
    ZeroT,
    #[error("Neumann series did not converge within {0} terms")]
    NoConvergenceWithinBudget(usize),
    #[error("dense computation requested for n = {0}, above the dense cap")]
    TooLargeForDense(usize),
    #[error("sequential estimator exceeded its sample cap of {0}")]
    BudgetExhausted(u64),
    #[error("relative regimes need a lower bound eta on t^T x*")]
    MissingEta,
    #[error("node {0} has zero out-degree")]
    ZeroOutDegree(usize),
    #[error("hypothesis of mode {mode} violated at node {node}")]
    HypothesisViolated { mode: String, node: usize },
    #[error("graph is not Eulerian")]
    NotEulerian,
    #[error("graph is not undirected")]
    NotUndirected,
    #[error("graph is disconnected")]
    Disconnected,
    #[error("source and target coincide")]
    SameEndpoints,
    #[error("dense cross-check disagreed by {0}")]
    OracleDisagreement(f64),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
