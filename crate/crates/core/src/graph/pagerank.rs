//! Single-node PageRank: estimators, closed-form bounds and dense references.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{build_contribution_system, build_ppr_system, check_alpha, Form, Graph};
use crate::error::{Error, Result};
use crate::oracle::dense_check;
use crate::report::{Estimate, Report};
use crate::system::{truncation_length, Decomposition, GapMode, SolverParams, SparseSystem, VecStats};
use crate::vector::SparseVector;
use crate::walker::estimate_relative;

/// Which system and hypothesis the estimator relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageRankMode {
    /// Degree-form PPR system; needs `d_out(v) >= (1-a) d_in(v)` everywhere.
    EulerianRelative,
    /// Rescaled PageRank system; needs `(1-a) max d_in <= 1`.
    BoundedIndegree,
    /// Contribution system of the target averaged over uniform sources; no hypothesis.
    GenericPpr,
}

impl PageRankMode {
    pub fn name(self) -> &'static str {
        match self {
            PageRankMode::EulerianRelative => "eulerian_relative",
            PageRankMode::BoundedIndegree => "bounded_indegree",
            PageRankMode::GenericPpr => "generic_ppr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRankQuery {
    pub alpha: f64,
    pub target: usize,
    /// Relative accuracy.
    pub epsilon: f64,
    pub mode: PageRankMode,
}

fn violated(mode: PageRankMode, node: usize) -> Error {
    Error::HypothesisViolated { mode: mode.name().to_string(), node }
}

/// The system for `(1-a) max(d_in, 1)`-rescaled PageRank: `pi = X y` with
/// `X y = (1-a) A^T D^{-1} X y + a/n 1`.
pub fn build_rescaled_system(g: &Graph, alpha: f64) -> Result<(Decomposition, Vec<f64>)> {
    check_alpha(alpha)?;
    g.check_out_degrees()?;
    let c = 1.0 - alpha;
    let x: Vec<f64> = (0..g.n()).map(|v| c * g.d_in(v).max(1.0)).collect();
    let entries: Vec<(usize, usize, f64)> = g.arcs().map(|(u, v, w)| (v, u, c * w * x[u] / g.d_out(u))).collect();
    let dec = Decomposition::forced(x.clone(), SparseSystem::from_triplets(g.n(), entries)?)?;
    Ok((dec, x))
}

/// Estimate of `pi(t)` within relative error `epsilon` with probability 3/4 per repeat.
///
/// `gamma` replaces the default gap bound `a/2`.
pub fn pagerank_estimate(
    g: &Graph,
    query: &PageRankQuery,
    gamma: Option<f64>,
    seed: u64,
    repeats: usize,
) -> Result<Estimate> {
    let start = Instant::now();
    let PageRankQuery { alpha, target: t, epsilon, mode } = *query;
    check_alpha(alpha)?;
    g.check_node(t)?;
    g.check_out_degrees()?;
    let n = g.n();
    let nf = n as f64;
    let c = 1.0 - alpha;
    let gamma = gamma.unwrap_or(alpha / 2.0);
    let floor = pagerank_lower_bounds(g, t, alpha)?.into_iter().map(|b| b.1).fold(0.0, f64::max);

    let (dec, b, tv, scale, dinv_bound, gap_mode) = match mode {
        PageRankMode::EulerianRelative => {
            if let Some(v) = (0..n).find(|&v| g.d_out(v) < c * g.d_in(v) * (1.0 - 1e-12)) {
                return Err(violated(mode, v));
            }
            let dec = build_ppr_system(g, alpha, Form::Degree)?;
            let min_out = g.stats().min_out;
            let dt = g.d_out(t);
            (
                dec,
                SparseVector::constant(n, alpha / nf),
                SparseVector::unit(n, t, 1.0)?,
                dt,
                alpha / (nf * min_out),
                GapMode::P1,
            )
        }
        PageRankMode::BoundedIndegree => {
            let max_in = g.stats().max_in;
            if c * max_in > 1.0 + 1e-12 {
                let v = (0..n).find(|&v| g.d_in(v) == max_in).unwrap_or(0);
                return Err(violated(mode, v));
            }
            if g.d_in(t) == 0.0 {
                let mut report = Report::new("pagerank_bounded_indegree", seed);
                report.estimate = alpha / nf;
                report.param("alpha", alpha).param("epsilon", epsilon).note("shortcut", "target has no in-arcs");
                report.finish(start);
                return Ok(Estimate { value: alpha / nf, report });
            }
            let (dec, x) = build_rescaled_system(g, alpha)?;
            if !dec.class().rddz() {
                let v =
                    (0..n).find(|&v| dec.offdiag().row(v).1.iter().sum::<f64>() > x[v] * (1.0 + 1e-12)).unwrap_or(0);
                return Err(violated(mode, v));
            }
            let min_x = x.iter().copied().fold(f64::INFINITY, f64::min);
            (
                dec,
                SparseVector::constant(n, alpha / nf),
                SparseVector::unit(n, t, 1.0)?,
                x[t],
                alpha / (nf * min_x),
                GapMode::P1,
            )
        }
        PageRankMode::GenericPpr => {
            let (dec, b) = build_contribution_system(g, alpha, t, Form::Identity)?;
            (dec, b, SparseVector::constant(n, 1.0 / nf), 1.0, alpha, GapMode::Pinf)
        }
    };
    let bs = VecStats::of(&dec, &b);
    let ts = VecStats::of(&dec, &tv);
    // t^T x* >= floor / scale, so an absolute truncation error eps floor / scale is relative
    let length = truncation_length(&dec, &bs, &ts, gamma, epsilon * floor / scale, gap_mode)?;
    let mut params = SolverParams::new(gamma, epsilon, length).with_seed(seed);
    params.repeats = repeats;
    params.dinv_b_bound = Some(dinv_bound);
    let inner = estimate_relative(&dec, &b, &tv, &params)?;
    let value = inner.value * scale;
    let mut report = inner.report;
    report.method = format!("pagerank_{}", mode.name());
    report.estimate = value;
    report
        .param("alpha", alpha)
        .param("target", t as f64)
        .detail("rescale", scale)
        .detail("lower_bound", floor)
        .note("gap_mode", format!("{gap_mode:?}").to_lowercase());
    report.finish(start);
    Ok(Estimate { value, report })
}

/// Lower bounds on `pi(t)`, by name. Bounds that need `d_in(t) > 0` are 0 otherwise.
pub fn pagerank_lower_bounds(g: &Graph, t: usize, alpha: f64) -> Result<Vec<(String, f64)>> {
    check_alpha(alpha)?;
    g.check_node(t)?;
    g.check_out_degrees()?;
    let s = g.stats();
    let n = s.n as f64;
    let c = 1.0 - alpha;
    let din = g.d_in(t);
    let mut out = vec![("uniform".to_string(), alpha / n)];
    let guarded = |x: f64| if din > 0.0 { x } else { 0.0 };
    out.push(("indegree".into(), guarded(alpha * c * din / (n * s.max_out))));
    out.push(("column_inf".into(), guarded(alpha * c * din * din / (n * g.column_inf(t) * s.l11))));
    out.push(("column_l2".into(), guarded(alpha * c * din * din / (n * n.sqrt() * g.column_l2(t) * s.frobenius))));
    if s.eulerian {
        out.push(("eulerian".into(), g.d_out(t) / (n * s.max_out)));
        if s.unweighted {
            out.push(("eulerian_unweighted".into(), c.sqrt() * g.d_out(t) / (n * (s.m as f64).sqrt())));
        }
    }
    Ok(out)
}

/// `d(t) / (n min_v d(v))` on Eulerian graphs.
pub fn pagerank_upper_bound_eulerian(g: &Graph, t: usize) -> Result<f64> {
    g.check_node(t)?;
    if !g.is_eulerian() {
        return Err(Error::NotEulerian);
    }
    let s = g.stats();
    Ok(g.d_out(t) / (s.n as f64 * s.min_out))
}

/// `a (I - (1-a) A^T D^{-1})^{-1}`; column `s` is the PPR vector of source `s`.
fn dense_ppr_matrix(g: &Graph, alpha: f64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    dense_check(g.n())?;
    g.check_out_degrees()?;
    let n = g.n();
    let mut m = DMatrix::identity(n, n);
    for (v, u, w) in g.arcs() {
        m[(u, v)] -= (1.0 - alpha) * w / g.d_out(v);
    }
    let inv = m.try_inverse().ok_or(Error::InvalidParameter("singular PageRank matrix".into()))?;
    Ok(inv * alpha)
}

/// Personalized PageRank from source `s`, densely.
pub fn dense_ppr(g: &Graph, alpha: f64, s: usize) -> Result<Vec<f64>> {
    g.check_node(s)?;
    Ok(dense_ppr_matrix(g, alpha)?.column(s).iter().copied().collect())
}

/// PageRank with the uniform start, densely by LU.
pub fn dense_pagerank(g: &Graph, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    dense_check(g.n())?;
    g.check_out_degrees()?;
    let n = g.n();
    let mut m = DMatrix::identity(n, n);
    for (v, u, w) in g.arcs() {
        m[(u, v)] -= (1.0 - alpha) * w / g.d_out(v);
    }
    let rhs = DVector::from_element(n, alpha / n as f64);
    let x = m.lu().solve(&rhs).ok_or(Error::InvalidParameter("singular PageRank matrix".into()))?;
    Ok(x.iter().copied().collect())
}

/// `max_{u,v} |pi(u,v)/d(v) - pi_T(v,u)/d(u)|` with `pi_T` the PPR of the transpose.
pub fn ppr_symmetry_defect(g: &Graph, alpha: f64) -> Result<f64> {
    if !g.is_eulerian() {
        return Err(Error::NotEulerian);
    }
    let p = dense_ppr_matrix(g, alpha)?;
    let q = dense_ppr_matrix(&g.transpose(), alpha)?;
    let n = g.n();
    let mut worst = 0.0f64;
    for u in 0..n {
        for v in 0..n {
            // pi(u, v) is entry v of the PPR vector of u
            let a = p[(v, u)] / g.d_out(v);
            let b = q[(u, v)] / g.d_out(u);
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{cycle, random_eulerian};
    use crate::rng::substream;

    #[test]
    fn two_cycle_bounds() {
        let g = cycle(2);
        let pi = dense_pagerank(&g, 0.2).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14);
        let lb = pagerank_lower_bounds(&g, 0, 0.2).unwrap();
        let get = |k: &str| lb.iter().find(|b| b.0 == k).unwrap().1;
        assert!((get("uniform") - 0.1).abs() < 1e-15);
        assert!((get("indegree") - 0.08).abs() < 1e-15);
        assert!((get("eulerian_unweighted") - 0.8f64.sqrt() / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!(lb.iter().all(|b| b.1 <= 0.5 + 1e-12));
        assert_eq!(pagerank_upper_bound_eulerian(&g, 0).unwrap(), 0.5);
    }

    #[test]
    fn sandwich_on_random_eulerian() {
        for seed in 0..20 {
            let mut rng = substream(seed, 0);
            let g = random_eulerian(15, 5, &mut rng);
            let pi = dense_pagerank(&g, 0.15).unwrap();
            for (t, &p) in pi.iter().enumerate() {
                for (_, b) in pagerank_lower_bounds(&g, t, 0.15).unwrap() {
                    assert!(b <= p + 1e-12);
                }
                assert!(pagerank_upper_bound_eulerian(&g, t).unwrap() >= p - 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_defect() {
        assert!(ppr_symmetry_defect(&cycle(3), 0.2).unwrap() <= 1e-10);
        let g = Graph::undirected(3, [(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        assert!(ppr_symmetry_defect(&g, 0.3).unwrap() <= 1e-12);
        let bad = Graph::from_arcs(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(ppr_symmetry_defect(&bad, 0.2).unwrap_err(), Error::NotEulerian);
    }

    #[test]
    fn no_in_arcs_shortcut() {
        let g = Graph::from_arcs(3, [(0, 1, 1.0), (1, 1, 1.0), (2, 1, 1.0)]).unwrap();
        let q = PageRankQuery { alpha: 0.7, target: 0, epsilon: 0.1, mode: PageRankMode::BoundedIndegree };
        let e = pagerank_estimate(&g, &q, None, 1, 1).unwrap();
        assert_eq!(e.value, 0.7 / 3.0);
    }

    #[test]
    fn hypotheses_are_checked() {
        let g = Graph::from_arcs(3, [(0, 2, 1.0), (1, 2, 1.0), (2, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let q = PageRankQuery { alpha: 0.1, target: 2, epsilon: 0.1, mode: PageRankMode::BoundedIndegree };
        assert!(matches!(pagerank_estimate(&g, &q, None, 1, 1), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn two_cycle_estimate() {
        let g = cycle(2);
        for mode in [PageRankMode::EulerianRelative, PageRankMode::BoundedIndegree, PageRankMode::GenericPpr] {
            let q = PageRankQuery { alpha: 0.2, target: 0, epsilon: 0.2, mode };
            let e = pagerank_estimate(&g, &q, None, 7, 1).unwrap();
            assert!((e.value - 0.5).abs() <= 0.1, "{mode:?}: {}", e.value);
        }
    }
}
