//! Sparse system model, the diagonal/off-diagonal split `M = D - A^T`, dominance
//! classification and the truncation length of the Neumann series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::SparseVector;

/// Relative slack used when comparing a diagonal against an off-diagonal absolute sum.
pub const DOMINANCE_SLACK: f64 = 1e-12;

/// Square sparse matrix stored in both row-major and column-major form so that row and
/// column scans are each proportional to the number of nonzeros touched.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem {
    n: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    diag: Vec<f64>,
}

fn compress(n: usize, entries: &[(usize, usize, f64)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    // entries must already be sorted by their leading index
    let mut ptr = vec![0usize; n + 1];
    for e in entries {
        ptr[e.0 + 1] += 1;
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    let idx = entries.iter().map(|e| e.1).collect();
    let val = entries.iter().map(|e| e.2).collect();
    (ptr, idx, val)
}

impl SparseSystem {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets. Explicit zeros are
    /// dropped; repeated coordinates are rejected.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries = Vec::new();
        for (i, j, v) in triplets {
            for k in [i, j] {
                if k >= n {
                    return Err(Error::IndexOutOfRange { index: k, n });
                }
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::DuplicateEntry(w[0].0, w[0].1));
        }
        let mut diag = vec![0.0; n];
        for &(i, j, v) in &entries {
            if i == j {
                diag[i] = v;
            }
        }
        let (row_ptr, row_idx, row_val) = compress(n, &entries);
        let mut by_col: Vec<(usize, usize, f64)> = entries.iter().map(|&(i, j, v)| (j, i, v)).collect();
        by_col.sort_by_key(|e| (e.0, e.1));
        let (col_ptr, col_idx, col_val) = compress(n, &by_col);
        Ok(SparseSystem { n, row_ptr, row_idx, row_val, col_ptr, col_idx, col_val, diag })
    }

    pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let n = m.nrows();
        Self::from_triplets(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j, m[(i, j)]))))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0))).expect("identity is well formed")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Column indices and values of row `j`.
    pub fn row(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[j]..self.row_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.row_val[r])
    }

    /// Row indices and values of column `k`.
    pub fn col(&self, k: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[k]..self.col_ptr[k + 1];
        (&self.col_idx[r.clone()], &self.col_val[r])
    }

    pub fn row_nnz(&self, j: usize) -> usize {
        self.row_ptr[j + 1] - self.row_ptr[j]
    }

    pub fn col_nnz(&self, k: usize) -> usize {
        self.col_ptr[k + 1] - self.col_ptr[k]
    }

    /// `M(k,k)`, or 0.0 when absent.
    pub fn diagonal(&self, k: usize) -> f64 {
        self.diag[k]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        let (idx, val) = self.row(j);
        idx.binary_search(&k).map(|p| val[p]).unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            let (idx, val) = self.row(j);
            idx.iter().zip(val).map(move |(&k, &v)| (j, k, v))
        })
    }

    /// Swaps the row and column stores.
    pub fn transpose(&self) -> SparseSystem {
        SparseSystem {
            n: self.n,
            row_ptr: self.col_ptr.clone(),
            row_idx: self.col_idx.clone(),
            row_val: self.col_val.clone(),
            col_ptr: self.row_ptr.clone(),
            col_idx: self.row_idx.clone(),
            col_val: self.row_val.clone(),
            diag: self.diag.clone(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.row_ptr == self.col_ptr && self.row_idx == self.col_idx && self.row_val == self.col_val
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok((0..self.n)
            .map(|j| {
                let (idx, val) = self.row(j);
                idx.iter().zip(val).map(|(&k, &v)| v * x[k]).sum()
            })
            .collect())
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (j, k, v) in self.triplets() {
            m[(j, k)] = v;
        }
        m
    }

    /// Smallest nonzero absolute entry, or `None` for the zero matrix.
    pub fn min_abs_entry(&self) -> Option<f64> {
        self.row_val.iter().map(|v| v.abs()).reduce(f64::min)
    }
}

/// Dominance flags of a matrix (or of a split `D - A^T`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceClass {
    pub rdd: bool,
    pub cdd: bool,
    /// Off-diagonals nonpositive.
    pub z: bool,
    pub symmetric: bool,
}

impl DominanceClass {
    pub fn sdd(&self) -> bool {
        self.rdd && self.symmetric
    }
    pub fn rcdd(&self) -> bool {
        self.rdd && self.cdd
    }
    pub fn rddz(&self) -> bool {
        self.rdd && self.z
    }
    pub fn cddz(&self) -> bool {
        self.cdd && self.z
    }
    pub fn rcddz(&self) -> bool {
        self.rcdd() && self.z
    }

    /// Short list of the names that apply, e.g. `["rdd", "cdd", "z", "sdd"]`.
    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (flag, name) in [
            (self.rdd, "rdd"),
            (self.cdd, "cdd"),
            (self.z, "z"),
            (self.symmetric, "symmetric"),
            (self.sdd(), "sdd"),
            (self.rcdd(), "rcdd"),
        ] {
            if flag {
                out.push(name);
            }
        }
        out
    }
}

/// Classifies `M` entrywise with the default slack.
pub fn classify(m: &SparseSystem) -> DominanceClass {
    classify_with_slack(m, DOMINANCE_SLACK)
}

pub fn classify_with_slack(m: &SparseSystem, slack: f64) -> DominanceClass {
    let n = m.dim();
    let positive = (0..n).all(|k| m.diagonal(k) > 0.0);
    let mut row_off = vec![0.0; n];
    let mut col_off = vec![0.0; n];
    let mut z = true;
    for (j, k, v) in m.triplets() {
        if j != k {
            row_off[j] += v.abs();
            col_off[k] += v.abs();
            z &= v <= 0.0;
        }
    }
    let dominated = |off: &[f64]| (0..n).all(|k| off[k] <= m.diagonal(k) * (1.0 + slack));
    DominanceClass {
        rdd: positive && dominated(&row_off),
        cdd: positive && dominated(&col_off),
        z,
        symmetric: m.is_symmetric(),
    }
}

fn classify_split(diag: &[f64], offdiag: &SparseSystem, slack: f64) -> DominanceClass {
    let n = diag.len();
    let positive = diag.iter().all(|&d| d > 0.0);
    let mut row_off = vec![0.0; n];
    let mut col_off = vec![0.0; n];
    let mut z = true;
    for (j, k, a) in offdiag.triplets() {
        row_off[j] += a.abs();
        col_off[k] += a.abs();
        z &= a >= 0.0;
    }
    let dominated = |off: &[f64]| (0..n).all(|k| off[k] <= diag[k] * (1.0 + slack));
    DominanceClass {
        rdd: positive && dominated(&row_off),
        cdd: positive && dominated(&col_off),
        z,
        symmetric: offdiag.is_symmetric(),
    }
}

/// The split `M = D_M - A_M^T`.
///
/// `offdiag` holds `A_M^T`. It has an empty diagonal unless the split was forced (graph
/// builders keep `D = D_G` or `I` even with self-loops), in which case `forced` is set and
/// the dominance flags refer to the split rather than to `M` itself.
#[derive(Clone, Debug)]
pub struct Decomposition {
    diag: Vec<f64>,
    offdiag: SparseSystem,
    class: DominanceClass,
    d_max: f64,
    row_cost: usize,
    col_cost: usize,
    forced: bool,
}

/// Splits `M` into its diagonal and negated off-diagonal part.
pub fn decompose(m: &SparseSystem) -> Result<Decomposition> {
    let n = m.dim();
    let diag: Vec<f64> = (0..n).map(|k| m.diagonal(k)).collect();
    if let Some(k) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NonPositiveDiagonal(k));
    }
    let offdiag = SparseSystem::from_triplets(n, m.triplets().filter(|&(j, k, _)| j != k).map(|(j, k, v)| (j, k, -v)))?;
    Ok(Decomposition::assemble(diag, offdiag, false))
}

impl Decomposition {
    /// Forced split: takes `D` and `A^T` as given; `A^T` may carry diagonal entries.
    pub fn forced(diag: Vec<f64>, offdiag: SparseSystem) -> Result<Self> {
        if diag.len() != offdiag.dim() {
            return Err(Error::DimensionMismatch { expected: offdiag.dim(), found: diag.len() });
        }
        if let Some(k) = diag.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::NonPositiveDiagonal(k));
        }
        Ok(Self::assemble(diag, offdiag, true))
    }

    fn assemble(diag: Vec<f64>, offdiag: SparseSystem, forced: bool) -> Self {
        let n = diag.len();
        let class = classify_split(&diag, &offdiag, DOMINANCE_SLACK);
        let d_max = diag.iter().copied().fold(0.0, f64::max);
        // nonzeros of M per row/column: the off-diagonal ones plus the diagonal
        let row_cost = (0..n).map(|j| offdiag.row_nnz(j) + 1).max().unwrap_or(1);
        let col_cost = (0..n).map(|k| offdiag.col_nnz(k) + 1).max().unwrap_or(1);
        Decomposition { diag, offdiag, class, d_max, row_cost, col_cost, forced }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self, k: usize) -> f64 {
        self.diag[k]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `A_M^T`.
    pub fn offdiag(&self) -> &SparseSystem {
        &self.offdiag
    }

    pub fn class(&self) -> DominanceClass {
        self.class
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Largest per-row nonzero count of `M`, the stand-in for the cost of one walk step.
    pub fn row_cost(&self) -> usize {
        self.row_cost
    }

    pub fn col_cost(&self) -> usize {
        self.col_cost
    }

    pub fn is_forced(&self) -> bool {
        self.forced
    }

    /// `nnz(M)`, counting one diagonal entry per row.
    pub fn nnz(&self) -> usize {
        let self_loops = (0..self.dim()).filter(|&k| self.offdiag.get(k, k) != 0.0).count();
        self.offdiag.nnz() - self_loops + self.dim()
    }

    /// `||M(., v)||_0`.
    pub fn column_nnz(&self, v: usize) -> usize {
        let (idx, _) = self.offdiag.col(v);
        idx.len() + usize::from(idx.binary_search(&v).is_err())
    }

    /// Rebuilds `M = D - A^T`.
    pub fn reconstruct(&self) -> SparseSystem {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (k, &d) in self.diag.iter().enumerate() {
            acc.insert((k, k), d);
        }
        for (j, k, a) in self.offdiag.triplets() {
            *acc.entry((j, k)).or_insert(0.0) -= a;
        }
        SparseSystem::from_triplets(self.dim(), acc.into_iter().map(|((j, k), v)| (j, k, v)))
            .expect("reconstruction of a valid split")
    }

    /// The split of `M^T`: same diagonal, `A^T` replaced by `A`.
    pub fn transposed(&self) -> Decomposition {
        let class = DominanceClass { rdd: self.class.cdd, cdd: self.class.rdd, ..self.class };
        Decomposition {
            diag: self.diag.clone(),
            offdiag: self.offdiag.transpose(),
            class,
            d_max: self.d_max,
            row_cost: self.col_cost,
            col_cost: self.row_cost,
            forced: self.forced,
        }
    }

    pub(crate) fn check_rdd(&self) -> Result<()> {
        if self.class.rdd {
            Ok(())
        } else {
            Err(Error::NotRdd)
        }
    }
}

/// The few numbers about `b` or `t` that the parameter formulas need.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VecStats {
    pub nnz: usize,
    pub l1: f64,
    /// `||D^{-1} v||_inf`
    pub dinv_inf: f64,
}

impl VecStats {
    pub fn of(dec: &Decomposition, v: &SparseVector) -> Self {
        let dinv_inf = v.iter().map(|(k, x)| (x / dec.diag(k)).abs()).fold(0.0, f64::max);
        VecStats { nnz: v.nnz(), l1: v.l1(), dinv_inf }
    }
}

/// Which norm's gap `gamma` refers to; the 1- and inf-norm versions drop a factor from
/// the logarithm in the truncation length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapMode {
    #[default]
    General,
    P1,
    Pinf,
}

fn check_gamma_epsilon(gamma: f64, epsilon: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

fn log_length(gamma: f64, arg: f64) -> usize {
    let x = arg.ln() / gamma;
    if x > 1.0 {
        x.ceil() as usize
    } else {
        1
    }
}

/// The constant `C` inside the logarithm of the truncation length.
pub fn truncation_constant(dec: &Decomposition, b: &VecStats, t: &VecStats, mode: GapMode) -> f64 {
    let t_nnz = if mode == GapMode::P1 { 1.0 } else { t.nnz as f64 };
    let b_nnz = if mode == GapMode::Pinf { 1.0 } else { b.nnz as f64 };
    dec.d_max() * t_nnz * t.dinv_inf * b_nnz * b.dinv_inf
}

/// Number of series terms `L = max(1, ceil(ln(C / (gamma eps)) / gamma))` so that the
/// truncated series is within `eps / 2` of `t^T x*`.
pub fn truncation_length(
    dec: &Decomposition,
    b: &VecStats,
    t: &VecStats,
    gamma: f64,
    epsilon: f64,
    mode: GapMode,
) -> Result<usize> {
    check_gamma_epsilon(gamma, epsilon)?;
    let c = truncation_constant(dec, b, t, mode);
    Ok(log_length(gamma, c / (gamma * epsilon)))
}

/// Length used for effective resistance, where `b = t = e_s - e_t` on a Laplacian:
/// `ceil(ln((1/d_s + 1/d_t) / (gamma eps)) / gamma)`.
pub fn resistance_truncation_length(gamma: f64, epsilon: f64, d_s: f64, d_t: f64) -> Result<usize> {
    check_gamma_epsilon(gamma, epsilon)?;
    Ok(log_length(gamma, (1.0 / d_s + 1.0 / d_t) / (gamma * epsilon)))
}

/// `1/2 (v + D^{-1} A^T v)`.
pub fn lazy_apply(dec: &Decomposition, v: &[f64]) -> Result<Vec<f64>> {
    let n = dec.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.len() });
    }
    let av = dec.offdiag().mul_vec(v)?;
    Ok((0..n).map(|j| 0.5 * (v[j] + av[j] / dec.diag(j))).collect())
}

/// Sparse version of [`lazy_apply`]; only coordinates reachable from the support are touched.
pub fn lazy_apply_sparse(dec: &Decomposition, v: &SparseVector) -> Result<SparseVector> {
    v.check_dim(dec.dim())?;
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, x) in v.iter() {
        *acc.entry(k).or_insert(0.0) += 0.5 * x;
        let (idx, val) = dec.offdiag().col(k);
        for (&j, &a) in idx.iter().zip(val) {
            *acc.entry(j).or_insert(0.0) += 0.5 * a / dec.diag(j) * x;
        }
    }
    SparseVector::from_pairs(dec.dim(), acc)
}

/// Parameters shared by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Lower bound on the maximum p-norm gap.
    pub gamma: f64,
    pub epsilon: f64,
    /// Truncation length `L`.
    pub length: usize,
    /// Sample budget override; the estimators derive it from `epsilon` and `length` otherwise.
    pub samples: Option<u64>,
    /// Push threshold.
    pub r_max: Option<f64>,
    /// Lower bound on `t^T x*` for relative modes.
    pub eta: Option<f64>,
    /// Caller-supplied upper bound on `||D^{-1} b||_inf`.
    pub dinv_b_bound: Option<f64>,
    pub seed: u64,
    /// Independent repetitions combined by their median (odd).
    pub repeats: usize,
    /// Ceiling for the sequential estimator.
    pub sample_cap: u64,
}

pub const DEFAULT_SEED: u64 = 0x5eed_2025;
pub const DEFAULT_SAMPLE_CAP: u64 = 1_000_000_000;

impl SolverParams {
    pub fn new(gamma: f64, epsilon: f64, length: usize) -> Self {
        SolverParams {
            gamma,
            epsilon,
            length,
            samples: None,
            r_max: None,
            eta: None,
            dinv_b_bound: None,
            seed: DEFAULT_SEED,
            repeats: 1,
            sample_cap: DEFAULT_SAMPLE_CAP,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n_s: u64) -> Self {
        self.samples = Some(n_s);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if self.length == 0 {
            return Err(Error::InvalidParameter("truncation length must be at least 1".into()));
        }
        if self.repeats == 0 || self.repeats % 2 == 0 {
            return Err(Error::InvalidParameter("repeats must be odd".into()));
        }
        if let Some(r) = self.r_max {
            if !(r >= 0.0) {
                return Err(Error::InvalidParameter(format!("r_max must be nonnegative, got {r}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> SparseSystem {
        let n = rows.len();
        SparseSystem::from_triplets(
            n,
            rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
        .unwrap()
    }

    #[test]
    fn upper_triangular_split() {
        let d = decompose(&m(&[&[2.0, -1.0], &[0.0, 3.0]])).unwrap();
        assert_eq!(d.diagonal(), &[2.0, 3.0]);
        assert_eq!(d.offdiag().get(0, 1), 1.0);
        assert_eq!(d.offdiag().nnz(), 1);
        let c = d.class();
        assert!(c.rdd && c.cdd && c.z && !c.symmetric);
    }

    #[test]
    fn identity_split() {
        let d = decompose(&SparseSystem::identity(2)).unwrap();
        assert_eq!(d.offdiag().nnz(), 0);
        assert_eq!(d.class(), DominanceClass { rdd: true, cdd: true, z: true, symmetric: true });
    }

    #[test]
    fn two_cycle_pagerank_matrix() {
        let d = decompose(&m(&[&[1.0, -0.8], &[-0.8, 1.0]])).unwrap();
        assert_eq!(d.offdiag().get(0, 1), 0.8);
        assert_eq!(d.offdiag().get(1, 0), 0.8);
        assert!(d.class().sdd() && d.class().z && d.class().rcdd());
    }

    #[test]
    fn missing_diagonal_is_an_error() {
        assert_eq!(decompose(&m(&[&[1.0, 0.0], &[1.0, 0.0]])).unwrap_err(), Error::NonPositiveDiagonal(1));
    }

    #[test]
    fn classification_examples() {
        let lap = classify(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        assert!(lap.sdd() && lap.z && lap.rcdd());
        let bad = classify(&m(&[&[1.0, -2.0], &[0.0, 1.0]]));
        assert!(!bad.rdd);
        // 2-cycle with D_G = I, (1 - alpha) A^T
        let deg = classify(&m(&[&[1.0, -0.8], &[-0.8, 1.0]]));
        assert!(deg.rcddz());
    }

    #[test]
    fn duplicates_rejected() {
        let r = SparseSystem::from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0)]);
        assert_eq!(r.unwrap_err(), Error::DuplicateEntry(0, 0));
    }

    #[test]
    fn truncation_length_examples() {
        let dec = decompose(&SparseSystem::identity(3)).unwrap();
        let unit = VecStats { nnz: 1, l1: 1.0, dinv_inf: 1.0 };
        // C = 1, gamma = 1, eps = C gives ln(1) = 0, clamped to 1
        assert_eq!(truncation_length(&dec, &unit, &unit, 1.0, 1.0, GapMode::General).unwrap(), 1);
        assert_eq!(truncation_length(&dec, &unit, &unit, 0.5, 0.01, GapMode::General).unwrap(), 11);
        assert_eq!(resistance_truncation_length(1.0, 0.1, 1.0, 1.0).unwrap(), 3);
        assert!(matches!(
            truncation_length(&dec, &unit, &unit, 0.0, 0.1, GapMode::General),
            Err(Error::InvalidGamma(_))
        ));
        assert!(matches!(
            truncation_length(&dec, &unit, &unit, 0.5, -1.0, GapMode::General),
            Err(Error::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn gap_modes_drop_one_factor() {
        let dec = decompose(&SparseSystem::identity(4)).unwrap();
        let b = VecStats { nnz: 4, l1: 4.0, dinv_inf: 1.0 };
        let t = VecStats { nnz: 3, l1: 3.0, dinv_inf: 1.0 };
        assert_eq!(truncation_constant(&dec, &b, &t, GapMode::General), 12.0);
        assert_eq!(truncation_constant(&dec, &b, &t, GapMode::P1), 4.0);
        assert_eq!(truncation_constant(&dec, &b, &t, GapMode::Pinf), 3.0);
    }

    #[test]
    fn lazy_apply_examples() {
        let dec = decompose(&SparseSystem::identity(3)).unwrap();
        assert_eq!(lazy_apply(&dec, &[2.0, -4.0, 1.0]).unwrap(), vec![1.0, -2.0, 0.5]);
        let dec = decompose(&m(&[&[2.0, -1.0], &[-1.0, 2.0]])).unwrap();
        assert_eq!(lazy_apply(&dec, &[1.0, 1.0]).unwrap(), vec![0.75, 0.75]);
        let sparse = lazy_apply_sparse(&dec, &SparseVector::from_dense(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(sparse.to_dense(), vec![0.75, 0.75]);
    }

    #[test]
    fn sparse_lazy_apply_stays_local() {
        // a path 0 - 1 - 2 - 3: starting at 0 only 0 and 1 are touched
        let lap =
            m(&[&[1.0, -1.0, 0.0, 0.0], &[-1.0, 2.0, -1.0, 0.0], &[0.0, -1.0, 2.0, -1.0], &[0.0, 0.0, -1.0, 1.0]]);
        let dec = decompose(&lap).unwrap();
        let out = lazy_apply_sparse(&dec, &SparseVector::unit(4, 0, 1.0).unwrap()).unwrap();
        assert_eq!(out.indices(), &[0, 1]);
    }

    #[test]
    fn transposed_swaps_roles() {
        let dec = decompose(&m(&[&[2.0, -1.0], &[0.0, 3.0]])).unwrap();
        let tr = dec.transposed();
        assert_eq!(tr.offdiag().get(1, 0), 1.0);
        assert_eq!(tr.transposed().offdiag(), dec.offdiag());
    }

    #[test]
    fn forced_split_keeps_self_loops() {
        let off = SparseSystem::from_triplets(2, [(0, 0, 0.5), (0, 1, 0.3), (1, 0, 0.8)]).unwrap();
        let dec = Decomposition::forced(vec![1.0, 1.0], off).unwrap();
        assert!(dec.is_forced());
        assert_eq!(dec.reconstruct().get(0, 0), 0.5);
        assert!(dec.class().rdd);
        assert_eq!(dec.column_nnz(0), 2);
        assert_eq!(dec.column_nnz(1), 2);
        assert_eq!(dec.nnz(), 4);
    }

    fn arb_system() -> impl Strategy<Value = SparseSystem> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, -3.0f64..3.0), 0..(3 * n)).prop_map(move |mut trip| {
                trip.sort_by_key(|e| (e.0, e.1));
                trip.dedup_by_key(|e| (e.0, e.1));
                let mut t: Vec<_> = trip.into_iter().filter(|e| e.0 != e.1).collect();
                t.extend((0..n).map(|k| (k, k, 1.0 + k as f64)));
                SparseSystem::from_triplets(n, t).unwrap()
            })
        })
    }

    fn dense_classify(m: &SparseSystem) -> DominanceClass {
        let a = m.to_dense();
        let n = a.nrows();
        let pos = (0..n).all(|i| a[(i, i)] > 0.0);
        let rdd = pos
            && (0..n).all(|i| {
                (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>() <= a[(i, i)] * (1.0 + DOMINANCE_SLACK)
            });
        let cdd = pos
            && (0..n).all(|j| {
                (0..n).filter(|&i| i != j).map(|i| a[(i, j)].abs()).sum::<f64>() <= a[(j, j)] * (1.0 + DOMINANCE_SLACK)
            });
        let z = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] <= 0.0));
        DominanceClass { rdd, cdd, z, symmetric: a == a.transpose() }
    }

    proptest! {
        #[test]
        fn reconstruction_is_exact(sys in arb_system()) {
            let dec = decompose(&sys).unwrap();
            prop_assert_eq!(dec.reconstruct(), sys);
        }

        #[test]
        fn classification_matches_dense_check(sys in arb_system()) {
            prop_assert_eq!(classify(&sys), dense_classify(&sys));
            prop_assert_eq!(decompose(&sys).unwrap().class(), dense_classify(&sys));
        }

        #[test]
        fn lazy_apply_is_linear(sys in arb_system(), c in -2.0f64..2.0, seed in 0u64..1000) {
            let dec = decompose(&sys).unwrap();
            let n = sys.dim();
            let u: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 7) as f64 - 3.0).collect();
            let v: Vec<f64> = (0..n).map(|i| ((i as u64 * 17 + seed * 3) % 5) as f64 - 2.0).collect();
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + c * b).collect();
            let lu = lazy_apply(&dec, &u).unwrap();
            let lv = lazy_apply(&dec, &v).unwrap();
            let lw = lazy_apply(&dec, &w).unwrap();
            for i in 0..n {
                prop_assert!((lw[i] - (lu[i] + c * lv[i])).abs() <= 1e-12 * (1.0 + lw[i].abs()));
            }
        }

        #[test]
        fn sparse_and_dense_lazy_apply_agree(sys in arb_system(), seed in 0u64..1000) {
            let dec = decompose(&sys).unwrap();
            let n = sys.dim();
            let v: Vec<f64> = (0..n).map(|i| if (i as u64 + seed) % 3 == 0 { 1.5 } else { 0.0 }).collect();
            let dense = lazy_apply(&dec, &v).unwrap();
            let sparse = lazy_apply_sparse(&dec, &SparseVector::from_dense(&v).unwrap()).unwrap().to_dense();
            for i in 0..n {
                prop_assert!((dense[i] - sparse[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn truncation_length_is_monotone(g1 in 0.01f64..1.0, g2 in 0.01f64..1.0, e1 in 1e-4f64..1.0, e2 in 1e-4f64..1.0) {
            let dec = decompose(&SparseSystem::identity(2)).unwrap();
            let s = VecStats { nnz: 2, l1: 3.0, dinv_inf: 2.0 };
            let (glo, ghi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            let (elo, ehi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let l = |g, e| truncation_length(&dec, &s, &s, g, e, GapMode::General).unwrap();
            prop_assert!(l(ghi, e1) <= l(glo, e1));
            prop_assert!(l(g1, ehi) <= l(g1, elo));
        }
    }
}
