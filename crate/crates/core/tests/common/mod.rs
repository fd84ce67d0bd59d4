//! Dense reference computations for the integration tests.
//!
//! Built straight from the matrix entries with nalgebra factorizations, not from the
//! library's own oracle module, so the two can be compared.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublin::{Decomposition, Graph, SparseSystem, SparseVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(m: &SparseSystem) -> DMatrix<f64> {
    let n = m.dim();
    let mut a = DMatrix::zeros(n, n);
    for (j, k, v) in m.triplets() {
        a[(j, k)] += v;
    }
    a
}

/// `D - A^T` rebuilt from the split, which differs from the matrix diagonal for forced splits.
pub fn dense_split(dec: &Decomposition) -> DMatrix<f64> {
    let n = dec.dim();
    let mut a = -dense(dec.offdiag());
    for k in 0..n {
        a[(k, k)] += dec.diag(k);
    }
    a
}

pub fn lu_solve(m: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let x = m.clone().lu().solve(&DVector::from_column_slice(b)).expect("nonsingular");
    x.iter().copied().collect()
}

/// Limit of the lazy series: `D^{-1/2} N^+ D^{-1/2} b` with `N = D^{-1/2} M D^{-1/2}`.
/// Agrees with `M^{-1} b` when `M` is nonsingular.
pub fn series_limit(dec: &Decomposition, b: &[f64]) -> Vec<f64> {
    let n = dec.dim();
    let m = dense_split(dec);
    let s = DVector::from_fn(n, |k, _| dec.diag(k).sqrt().recip());
    let mut nmat = m.clone();
    for j in 0..n {
        for k in 0..n {
            nmat[(j, k)] *= s[j] * s[k];
        }
    }
    let pinv = nmat.pseudo_inverse(1e-10).expect("svd converges");
    let rhs = DVector::from_fn(n, |k, _| b[k] * s[k]);
    let y = pinv * rhs;
    (0..n).map(|k| y[k] * s[k]).collect()
}

/// `x_L = 1/2 sum_{l<L} B^l D^{-1} b` with `B = I - 1/2 D^{-1} M`, by plain iteration.
pub fn truncated(dec: &Decomposition, b: &[f64], length: usize) -> Vec<f64> {
    let n = dec.dim();
    let m = dense_split(dec);
    let mut term = DVector::from_fn(n, |k, _| b[k] / dec.diag(k));
    let mut acc = DVector::zeros(n);
    for _ in 0..length {
        acc += &term;
        let mt = &m * &term;
        term = DVector::from_fn(n, |k, _| term[k] - 0.5 * mt[k] / dec.diag(k));
    }
    (acc * 0.5).iter().copied().collect()
}

pub fn dot(t: &SparseVector, x: &[f64]) -> f64 {
    t.iter().map(|(k, v)| v * x[k]).sum()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn residual_inf(m: &SparseSystem, x: &[f64], b: &[f64]) -> f64 {
    let r = dense(m) * DVector::from_column_slice(x) - DVector::from_column_slice(b);
    r.amax()
}

/// PageRank with restart `alpha` from `LU(I - (1-a) A^T D_out^{-1}) pi = a/n 1`.
pub fn pagerank(g: &Graph, alpha: f64) -> Vec<f64> {
    let n = g.n();
    let mut m = DMatrix::identity(n, n);
    for (u, v, w) in g.arcs() {
        m[(v, u)] -= (1.0 - alpha) * w / g.d_out(u);
    }
    lu_solve(&m, &vec![alpha / n as f64; n])
}

/// `R(s,t) = (e_s - e_t)^T L^+ (e_s - e_t)` from the Laplacian pseudoinverse.
pub fn resistance(g: &Graph, s: usize, t: usize) -> f64 {
    let n = g.n();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for (u, v, w) in g.arcs() {
        l[(u, v)] -= w;
        l[(u, u)] += w;
    }
    let p = l.pseudo_inverse(1e-10).expect("svd converges");
    p[(s, s)] + p[(t, t)] - p[(s, t)] - p[(t, s)]
}

/// Fraction of `values` within `tol` of `truth`.
pub fn hit_rate(values: &[f64], truth: f64, tol: f64) -> f64 {
    values.iter().filter(|v| (*v - truth).abs() <= tol).count() as f64 / values.len() as f64
}
