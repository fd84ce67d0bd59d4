//! Dense reference computations: the canonical solution, its truncation, p-norm gaps and
//! the spectral gap. Everything here is O(n^3) and meant for n up to a few hundred.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::Decomposition;

/// Largest dimension the dense routines accept.
pub const DENSE_CAP: usize = 512;
/// Singular values / eigenvalues below this count as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Longest Neumann sum attempted, in terms.
pub const NEUMANN_CAP: usize = 1 << 20;
const GAP_PROBES: usize = 10_000;

pub(crate) fn dense_check(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::TooLargeForDense(n));
    }
    Ok(())
}

fn check_len(n: usize, found: usize) -> Result<()> {
    if n != found {
        return Err(Error::DimensionMismatch { expected: n, found });
    }
    Ok(())
}

/// `A_M^T` as a dense matrix.
pub fn dense_offdiag(dec: &Decomposition) -> DMatrix<f64> {
    dec.offdiag().to_dense()
}

/// `B = 1/2 (I + D^{-1} A^T)`.
pub fn lazy_operator(dec: &Decomposition) -> Result<DMatrix<f64>> {
    dense_check(dec.dim())?;
    Ok(lazy_from(dec, |a| a))
}

/// `1/2 (I + D^{-1} |A^T|)`.
pub fn abs_lazy_operator(dec: &Decomposition) -> Result<DMatrix<f64>> {
    dense_check(dec.dim())?;
    Ok(lazy_from(dec, f64::abs))
}

fn lazy_from(dec: &Decomposition, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = dec.dim();
    let mut b = DMatrix::identity(n, n) * 0.5;
    for (j, k, a) in dec.offdiag().triplets() {
        b[(j, k)] += 0.5 * f(a) / dec.diag(j);
    }
    b
}

fn dinv(dec: &Decomposition, b: &[f64]) -> DVector<f64> {
    DVector::from_iterator(b.len(), b.iter().enumerate().map(|(k, v)| v / dec.diag(k)))
}

/// `sum_{l < len} op^l v` by Horner's rule.
pub fn operator_series(op: &DMatrix<f64>, v: &DVector<f64>, len: usize) -> DVector<f64> {
    let mut acc = v.clone();
    for _ in 1..len {
        acc = v + op * acc;
    }
    acc
}

/// `x* = 1/2 sum_l B^l D^{-1} b`, summed by repeated doubling until the last doubling
/// window contributes less than `tol / 4` or the residual is at round-off level.
///
/// For symmetric dominant inputs the result is compared with the pseudoinverse form.
pub fn exact_solution(dec: &Decomposition, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = dec.dim();
    dense_check(n)?;
    check_len(n, b.len())?;
    let class = dec.class();
    if !(class.rdd || class.cdd) {
        return Err(Error::NotDominant);
    }
    let op = lazy_operator(dec)?;
    let mut m = -dense_offdiag(dec);
    for k in 0..n {
        m[(k, k)] += dec.diag(k);
    }
    let bv = DVector::from_column_slice(b);
    let mut sum = dinv(dec, b);
    let mut power = op;
    let mut terms = 1usize;
    loop {
        let inc = &power * &sum;
        sum += &inc;
        terms *= 2;
        if inc.amax() <= 0.25 * tol {
            break;
        }
        // on singular systems the null-space round-off doubles with every step, so the
        // increments never shrink; stop once the residual is at machine level instead
        let residual = (&m * &sum * 0.5 - &bv).amax();
        if residual <= 1e-14 * (bv.amax() + dec.d_max() * sum.amax()) {
            break;
        }
        if terms >= NEUMANN_CAP {
            return Err(Error::NoConvergenceWithinBudget(terms));
        }
        power = &power * &power;
    }
    let x: Vec<f64> = sum.iter().map(|v| 0.5 * v).collect();
    if class.sdd() {
        let y = pseudoinverse_solution(dec, b)?;
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > 1e-6 * scale {
            return Err(Error::OracleDisagreement(gap));
        }
    }
    Ok(x)
}

/// `D^{-1/2} Mt^+ D^{-1/2} b` with `Mt = D^{-1/2} M D^{-1/2}`; symmetric splits only.
pub fn pseudoinverse_solution(dec: &Decomposition, b: &[f64]) -> Result<Vec<f64>> {
    let n = dec.dim();
    dense_check(n)?;
    check_len(n, b.len())?;
    if !dec.class().sdd() {
        return Err(Error::NotSdd);
    }
    let eig = normalized_matrix(dec).symmetric_eigen();
    let sq: Vec<f64> = dec.diagonal().iter().map(|d| d.sqrt()).collect();
    let z = DVector::from_iterator(n, (0..n).map(|k| b[k] / sq[k]));
    let coords = eig.eigenvectors.transpose() * z;
    let scaled = DVector::from_iterator(
        n,
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| if l.abs() > RANK_TOL { c / l } else { 0.0 }),
    );
    let w = &eig.eigenvectors * scaled;
    Ok((0..n).map(|k| w[k] / sq[k]).collect())
}

/// `D^{-1/2} (D - A^T) D^{-1/2}`.
fn normalized_matrix(dec: &Decomposition) -> DMatrix<f64> {
    let n = dec.dim();
    let mut m = DMatrix::identity(n, n);
    for (j, k, a) in dec.offdiag().triplets() {
        m[(j, k)] -= a / (dec.diag(j) * dec.diag(k)).sqrt();
    }
    m
}

/// `x*_L = 1/2 sum_{l < L} B^l D^{-1} b`.
pub fn truncated_solution(dec: &Decomposition, b: &[f64], length: usize) -> Result<Vec<f64>> {
    let n = dec.dim();
    check_len(n, b.len())?;
    if length == 0 {
        return Err(Error::InvalidParameter("truncation length must be at least 1".into()));
    }
    let op = lazy_operator(dec)?;
    let s = operator_series(&op, &dinv(dec, b), length);
    Ok(s.iter().map(|v| 0.5 * v).collect())
}

/// Which induced norm a gap refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PNorm {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl PNorm {
    pub const ALL: [PNorm; 3] = [PNorm::One, PNorm::Two, PNorm::Inf];

    pub fn label(self) -> &'static str {
        match self {
            PNorm::One => "1",
            PNorm::Two => "2",
            PNorm::Inf => "inf",
        }
    }
}

/// A p-norm gap, exact when the restricted norm could be computed in closed form and an
/// interval `[lower, upper]` otherwise. `value` is the conservative end, `lower`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub p: PNorm,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

fn induced_norm(m: &DMatrix<f64>, p: PNorm) -> f64 {
    match p {
        PNorm::One => m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
        PNorm::Inf => m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
        PNorm::Two => largest_singular_value(m),
    }
}

fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn vector_norm(v: &DVector<f64>, p: PNorm) -> f64 {
    match p {
        PNorm::One => v.lp_norm(1),
        PNorm::Two => v.norm(),
        PNorm::Inf => v.amax(),
    }
}

/// `X = D^{-1/q} A^T D^{-1/p}` with `1/p + 1/q = 1`.
fn scaled_offdiag(dec: &Decomposition, p: PNorm) -> DMatrix<f64> {
    let n = dec.dim();
    let mut x = DMatrix::zeros(n, n);
    for (j, k, a) in dec.offdiag().triplets() {
        let (dj, dk) = (dec.diag(j), dec.diag(k));
        x[(j, k)] = match p {
            PNorm::One => a / dk,
            PNorm::Inf => a / dj,
            PNorm::Two => a / (dj * dk).sqrt(),
        };
    }
    x
}

/// The p-norm gap `1 - || 1/2 (I + X) restricted to range(I - X) ||_p`.
pub fn p_norm_gap(dec: &Decomposition, p: PNorm) -> Result<GapReport> {
    let n = dec.dim();
    dense_check(n)?;
    let x = scaled_offdiag(dec, p);
    let eye = DMatrix::<f64>::identity(n, n);
    let b = (&eye + &x) * 0.5;
    let full = 1.0 - induced_norm(&b, p);
    let svd = (&eye - &x).svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let keep: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] > RANK_TOL).collect();
    if keep.len() == n {
        return Ok(GapReport { p, value: full, lower: full, upper: full, exact: true });
    }
    let basis = u.select_columns(keep.iter());
    if p == PNorm::Two {
        let g = 1.0 - largest_singular_value(&(&b * &basis));
        return Ok(GapReport { p, value: g, lower: g, upper: g, exact: true });
    }
    // probe the restricted norm from below: projected coordinate vectors, then random mixes
    let r = basis.ncols();
    let proj = &basis * basis.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a9);
    let mut best = 0.0f64;
    for i in 0..GAP_PROBES {
        let v = if i < n {
            proj.column(i).into_owned()
        } else {
            &basis * DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0))
        };
        let size = vector_norm(&v, p);
        if size > 1e-12 {
            best = best.max(vector_norm(&(&b * &v), p) / size);
        }
    }
    let upper = (1.0 - best).max(full);
    Ok(GapReport { p, value: full, lower: full, upper, exact: false })
}

/// Largest of the 1-, 2- and inf-norm gaps.
pub fn gap_max(dec: &Decomposition) -> Result<GapReport> {
    let mut best: Option<GapReport> = None;
    for p in PNorm::ALL {
        let g = p_norm_gap(dec, p)?;
        if best.is_none_or(|b| g.value > b.value) {
            best = Some(g);
        }
    }
    Ok(best.expect("three norms evaluated"))
}

/// Half the smallest nonzero eigenvalue of `D^{-1/2} M D^{-1/2}`.
pub fn spectral_gap_sdd(dec: &Decomposition) -> Result<f64> {
    dense_check(dec.dim())?;
    if !dec.class().sdd() {
        return Err(Error::NotSdd);
    }
    let eig = normalized_matrix(dec).symmetric_eigen();
    eig.eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > RANK_TOL)
        .reduce(f64::min)
        .map(|l| 0.5 * l)
        .ok_or(Error::InvalidParameter("matrix has no nonzero eigenvalue".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{decompose, SparseSystem};

    fn dec(rows: &[&[f64]]) -> Decomposition {
        let n = rows.len();
        decompose(
            &SparseSystem::from_triplets(
                n,
                rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_solution() {
        let d = dec(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(close(&exact_solution(&d, &[3.0, -1.0], 1e-12).unwrap(), &[3.0, -1.0], 1e-12));
    }

    #[test]
    fn edge_laplacian_solution() {
        let d = dec(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let x = exact_solution(&d, &[1.0, -1.0], 1e-12).unwrap();
        assert!(close(&x, &[0.5, -0.5], 1e-10));
        assert!((x[0] - x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_cycle_pagerank_solution() {
        let d = dec(&[&[1.0, -0.8], &[-0.8, 1.0]]);
        let x = exact_solution(&d, &[0.2, 0.0], 1e-13).unwrap();
        assert!(close(&x, &[5.0 / 9.0, 4.0 / 9.0], 1e-12));
    }

    #[test]
    fn truncated_examples() {
        let d = dec(&[&[2.0, 0.0], &[0.0, 2.0]]);
        assert!(close(&truncated_solution(&d, &[2.0, 0.0], 1).unwrap(), &[0.5, 0.0], 0.0));
        assert!(close(&truncated_solution(&d, &[2.0, 0.0], 3).unwrap(), &[0.875, 0.0], 1e-15));
    }

    #[test]
    fn gap_examples() {
        let eye = dec(&[&[1.0, 0.0], &[0.0, 1.0]]);
        for p in PNorm::ALL {
            let g = p_norm_gap(&eye, p).unwrap();
            assert!(g.exact && (g.value - 0.5).abs() < 1e-15);
        }
        assert_eq!(gap_max(&eye).unwrap().value, 0.5);
        assert!((spectral_gap_sdd(&eye).unwrap() - 0.5).abs() < 1e-15);

        let edge = dec(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let g2 = p_norm_gap(&edge, PNorm::Two).unwrap();
        assert!(g2.exact && (g2.value - 1.0).abs() < 1e-12);
        assert!((spectral_gap_sdd(&edge).unwrap() - 1.0).abs() < 1e-12);
        let g1 = p_norm_gap(&edge, PNorm::One).unwrap();
        assert!(!g1.exact && g1.lower <= g1.upper);

        let ppr = dec(&[&[1.0, -0.8], &[-0.8, 1.0]]);
        let g = p_norm_gap(&ppr, PNorm::One).unwrap();
        assert!(g.exact && (g.value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_gap() {
        let n = 5;
        let rows: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { (n - 1) as f64 } else { -1.0 }).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = dec(&refs);
        let want = n as f64 / (2.0 * (n - 1) as f64);
        assert!((spectral_gap_sdd(&d).unwrap() - want).abs() < 1e-12);
        assert!((gap_max(&d).unwrap().value - want).abs() < 1e-8);
    }

    #[test]
    fn non_dominant_rejected() {
        let d = dec(&[&[1.0, -2.0], &[-2.0, 1.0]]);
        assert_eq!(exact_solution(&d, &[1.0, 0.0], 1e-9).unwrap_err(), Error::NotDominant);
        assert_eq!(spectral_gap_sdd(&d).unwrap_err(), Error::NotSdd);
    }
}
