//! Local solvers for diagonally dominant systems `M x = b`.
//!
//! The quantity of interest is `t^T x*` where `x* = 1/2 sum_l B^l D^{-1} b` and
//! `B = 1/2 (I + D^{-1} A^T)` for the split `M = D - A^T`. It is estimated by sampling
//! signed lazy walks ([`walker`]), by deterministic leveled push ([`push`]), or by both
//! together ([`bidirectional`]). [`graph`] builds PageRank and effective-resistance
//! instances on top; [`oracle`] has dense references for checking all of it.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod alias;
pub mod bidirectional;
pub mod error;
pub mod gen;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod push;
pub mod report;
pub mod rng;
pub mod system;
pub mod vector;
pub mod walker;

pub use error::{Error, Result};
pub use graph::Graph;
pub use push::PushState;
pub use report::{Cost, Estimate, Report};
pub use system::{
    classify, decompose, truncation_length, Decomposition, DominanceClass, GapMode, SolverParams, SparseSystem,
    VecStats,
};
pub use vector::SparseVector;
