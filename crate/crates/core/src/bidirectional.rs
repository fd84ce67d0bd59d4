//! Push followed by walks over the leftover residues.
//!
//! After push, `t^T x*_L = base + 1/2 sum_{j<L} t^T B^j c_j` with
//! `base = 1/2 t^T (sum_l p^l + r^{L-1})` and `c_j` the residue prefix for length `j`.
//! The second term is estimated with the same walks as the pure sampling estimator,
//! weighting a walk of length `j` ending at `v` by `c_j(v)`.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{abs_lazy_operator, operator_series};
use crate::push::{prefix_unchecked, push_estimate, push_run, PushState};
use crate::report::{Estimate, Report};
use crate::rng::Tally;
use crate::system::{truncation_length, Decomposition, GapMode, VecStats};
use crate::vector::SparseVector;
use crate::walker::{mean_of_walks, median, repeat_seed, SourceSampler, CHEBYSHEV_C, HOEFFDING_C};

/// Which pair of `(r_max, n_s)` formulas a plan uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Bounded samples, Hoeffding.
    Hoeffding,
    /// Chebyshev with the variance bound.
    Variance,
    /// Hoeffding, tuned for `b = e_w` on average over `w`.
    Average,
    /// Relative error on RCDDZ systems given `eta <= t^T x*`.
    RelativeRcddz,
    /// Relative error on RDDZ systems, `b = e_w`, on average over `w`.
    RelativeAverage,
}

impl Regime {
    pub const ALL: [Regime; 5] =
        [Regime::Hoeffding, Regime::Variance, Regime::Average, Regime::RelativeRcddz, Regime::RelativeAverage];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Hoeffding => "hoeffding",
            Regime::Variance => "variance",
            Regime::Average => "average",
            Regime::RelativeRcddz => "relative_rcddz",
            Regime::RelativeAverage => "relative_average",
        }
    }

    pub fn is_relative(self) -> bool {
        matches!(self, Regime::RelativeRcddz | Regime::RelativeAverage)
    }
}

/// Inputs to [`plan`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub gamma: f64,
    pub epsilon: f64,
    /// Lower bound on `t^T x*`, needed by the relative regimes.
    pub eta: Option<f64>,
    /// Use this `L` instead of the truncation formula.
    pub length: Option<usize>,
    pub gap_mode: GapMode,
}

impl PlanRequest {
    pub fn new(gamma: f64, epsilon: f64) -> Self {
        PlanRequest { gamma, epsilon, eta: None, length: None, gap_mode: GapMode::General }
    }
}

/// Threshold, sample count and length for one bidirectional run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiPlan {
    pub regime: Regime,
    pub r_max: f64,
    pub n_s: u64,
    pub length: usize,
    /// Absolute error for the absolute regimes, the relative factor otherwise.
    pub error_target: f64,
    pub sample_constant: f64,
    /// `||b||_1 L / r_max`.
    pub predicted_push: f64,
    /// `f L n_s`.
    pub predicted_walk: f64,
    pub rationale: String,
}

impl BidiPlan {
    pub fn predicted_total(&self) -> f64 {
        self.predicted_push + self.predicted_walk
    }
}

fn ceil_count(x: f64) -> Result<u64> {
    let n = x.ceil().max(1.0);
    if !n.is_finite() || n > u64::MAX as f64 / 2.0 {
        return Err(Error::InvalidParameter(format!("sample count {x:e} is not representable")));
    }
    Ok(n as u64)
}

/// `r_max` and `n_s` for `regime`.
pub fn plan(dec: &Decomposition, b: &VecStats, t: &VecStats, req: &PlanRequest, regime: Regime) -> Result<BidiPlan> {
    let eps = req.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(eps));
    }
    if t.l1 == 0.0 {
        return Err(Error::ZeroT);
    }
    if b.l1 == 0.0 {
        return Err(Error::InvalidParameter("b is zero; nothing to plan".into()));
    }
    let eta = if regime.is_relative() {
        let e = req.eta.ok_or(Error::MissingEta)?;
        if !(e > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {e}")));
        }
        e
    } else {
        0.0
    };
    let average = matches!(regime, Regime::Average | Regime::RelativeAverage);
    if average && b.nnz != 1 {
        return Err(Error::InvalidParameter("average regimes need b with a single nonzero".into()));
    }
    if regime == Regime::RelativeRcddz && !dec.class().rcddz() {
        return Err(Error::NotRcdd);
    }
    if regime == Regime::RelativeAverage && !dec.class().rddz() {
        return Err(Error::NotRddz);
    }
    let f = dec.row_cost() as f64;
    let density = dec.nnz() as f64 / dec.dim() as f64;
    let tn = t.l1;
    let bn = b.l1;
    let dinv = b.dinv_inf;
    let d_w = bn / dinv;
    let (error_target, length_target) = match regime {
        Regime::Hoeffding | Regime::Variance => (eps, eps),
        Regime::Average => (eps * dinv, eps * dinv),
        Regime::RelativeRcddz => (eps, eps * eta),
        Regime::RelativeAverage => (eps * dinv.sqrt(), eps * dinv.sqrt() * eta),
    };
    let len = match req.length {
        Some(l) if l >= 1 => l,
        Some(_) => return Err(Error::InvalidParameter("truncation length must be at least 1".into())),
        None => truncation_length(dec, b, t, req.gamma, length_target, req.gap_mode)?,
    };
    let l = len as f64;
    let (r_max, n_s, constant, why) = match regime {
        Regime::Hoeffding => {
            let r = eps.powf(2.0 / 3.0) * bn.cbrt() / (f.cbrt() * tn.powf(2.0 / 3.0) * l.powf(4.0 / 3.0));
            let n = HOEFFDING_C * (tn * l * l * r / eps).powi(2);
            (
                r,
                n,
                HOEFFDING_C,
                "r_max balances push ||b||_1 L / r_max against Hoeffding walks f L^5 ||t||^2 r^2 / eps^2",
            )
        }
        Regime::Variance => {
            let r = eps * bn.sqrt() / (f.sqrt() * tn * dinv.sqrt() * l.powf(1.5));
            let n = CHEBYSHEV_C * tn * tn * dinv * l.powi(3) * r / (eps * eps);
            (r, n, CHEBYSHEV_C, "r_max balances push against Chebyshev walks with the residue variance bound")
        }
        Regime::Average => {
            let r = density.cbrt() * eps.powf(2.0 / 3.0) / (f.cbrt() * tn.powf(2.0 / 3.0) * d_w * l.powf(4.0 / 3.0));
            let n = HOEFFDING_C * (tn * d_w * l * l * r / eps).powi(2);
            (r, n, HOEFFDING_C, "average push cost nnz/n L / (d_w r_max) balanced against Hoeffding walks")
        }
        Regime::RelativeRcddz => {
            let r = bn.sqrt() * eps * eta.sqrt() / (f.sqrt() * tn.sqrt() * l);
            let n = CHEBYSHEV_C * tn * l * l * r / (eps * eps * eta);
            (r, n, CHEBYSHEV_C, "Chebyshev with variance at most ||t||_1 L^2 r_max t^T x* / 4")
        }
        Regime::RelativeAverage => {
            let r = density.sqrt() * eps * eta.sqrt() / (f.sqrt() * tn.sqrt() * d_w * l);
            let n = CHEBYSHEV_C * tn * d_w * l * l * r / (eps * eps * eta);
            (r, n, CHEBYSHEV_C, "average push cost balanced against Chebyshev walks, b = e_w")
        }
    };
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("planned r_max {r_max:e} is not positive")));
    }
    let n_s = ceil_count(n_s)?;
    Ok(BidiPlan {
        regime,
        r_max,
        n_s,
        length: len,
        error_target,
        sample_constant: constant,
        predicted_push: bn * l / r_max,
        predicted_walk: f * l * n_s as f64,
        rationale: why.to_string(),
    })
}

/// The cheaper of the Hoeffding and variance plans by predicted work.
pub fn plan_auto(dec: &Decomposition, b: &VecStats, t: &VecStats, req: &PlanRequest) -> Result<BidiPlan> {
    let h = plan(dec, b, t, req, Regime::Hoeffding)?;
    let v = plan(dec, b, t, req, Regime::Variance)?;
    Ok(if v.predicted_total() < h.predicted_total() { v } else { h })
}

/// Closed-form total cost of the Hoeffding plan,
/// `(1 + c) f^{1/3} ||t||_1^{2/3} ||b||_1^{2/3} L^{7/3} eps^{-2/3}`.
pub fn hoeffding_cost(dec: &Decomposition, b: &VecStats, t: &VecStats, length: usize, epsilon: f64) -> f64 {
    let f = dec.row_cost() as f64;
    (1.0 + HOEFFDING_C)
        * f.cbrt()
        * t.l1.powf(2.0 / 3.0)
        * b.l1.powf(2.0 / 3.0)
        * (length as f64).powf(7.0 / 3.0)
        * epsilon.powf(-2.0 / 3.0)
}

/// Closed-form total cost of the variance plan,
/// `(1 + c) f^{1/2} ||t||_1 ||b||_1^{1/2} ||D^{-1} b||_inf^{1/2} L^{5/2} / eps`.
pub fn variance_cost(dec: &Decomposition, b: &VecStats, t: &VecStats, length: usize, epsilon: f64) -> f64 {
    let f = dec.row_cost() as f64;
    (1.0 + CHEBYSHEV_C) * f.sqrt() * t.l1 * (b.l1 * b.dinv_inf).sqrt() * (length as f64).powf(2.5) / epsilon
}

/// Per-sample variance bound `1/4 ||t||_1 L^2 r_max |t|^T sum_{l<L} B_abs^l D^{-1}|b|`.
pub fn variance_certificate(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    length: usize,
    r_max: f64,
) -> Result<f64> {
    let n = dec.dim();
    b.check_dim(n)?;
    t.check_dim(n)?;
    let op = abs_lazy_operator(dec)?;
    let y = DVector::from_iterator(n, (0..n).map(|k| b.get(k).abs() / dec.diag(k)));
    let h = operator_series(&op, &y, length);
    let th: f64 = t.iter().map(|(k, x)| x.abs() * h[k]).sum();
    Ok(0.25 * t.l1() * (length * length) as f64 * r_max * th)
}

/// Walk phase over a finished push state: returns the sample tally for `n_s` walks.
pub fn sample_residues(dec: &Decomposition, state: &PushState, t: &SparseVector, n_s: u64, seed: u64) -> Result<Tally> {
    dec.check_rdd()?;
    t.check_dim(dec.dim())?;
    let source = SourceSampler::new(t)?;
    let scale = 0.5 * source.total() * state.length as f64;
    let weight = |l: usize, v: usize| prefix_unchecked(state, l, v);
    Ok(mean_of_walks(dec, &source, state.length, scale, &weight, n_s, seed))
}

/// Runs `plan`: push, then `n_s` walks; the median over `repeats` walk phases.
pub fn estimate(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    plan: &BidiPlan,
    seed: u64,
    repeats: usize,
) -> Result<Estimate> {
    let start = Instant::now();
    dec.check_rdd()?;
    b.check_dim(dec.dim())?;
    t.check_dim(dec.dim())?;
    if t.is_zero() {
        return Err(Error::ZeroT);
    }
    if plan.length == 0 || !(plan.r_max >= 0.0) || plan.n_s == 0 {
        return Err(Error::InvalidParameter("plan needs L >= 1, r_max >= 0 and n_s >= 1".into()));
    }
    if repeats == 0 || repeats % 2 == 0 {
        return Err(Error::InvalidParameter("repeats must be odd".into()));
    }
    let state = push_run(dec, b, plan.length, plan.r_max)?;
    let base = push_estimate(&state, t)?;
    let mut values = Vec::with_capacity(repeats);
    let mut tally = Tally::default();
    for r in 0..repeats {
        let s = sample_residues(dec, &state, t, plan.n_s, repeat_seed(seed, r))?;
        values.push(s.mean());
        tally = Tally::merge(tally, s);
    }
    let correction = median(values);
    let value = base + correction;
    let mut report = Report::new("bidirectional", seed);
    report.estimate = value;
    report.error_target = plan.error_target;
    report
        .param("L", plan.length as f64)
        .param("r_max", plan.r_max)
        .param("n_s", plan.n_s as f64)
        .param("repeats", repeats as f64)
        .param("sample_constant", plan.sample_constant)
        .detail("base", base)
        .detail("correction", correction)
        .detail("sample_variance", tally.variance())
        .detail("pushes", state.push_count as f64)
        .detail("predicted_push", plan.predicted_push)
        .detail("predicted_walk", plan.predicted_walk)
        .note("regime", plan.regime.name())
        .note("rationale", plan.rationale.clone());
    report.cost.push_work = state.work_units;
    report.cost.walk_steps = tally.steps;
    report.cost.n_s = plan.n_s;
    report.finish(start);
    Ok(Estimate { value, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{decompose, SolverParams, SparseSystem};
    use crate::walker::estimate_abs;

    fn edge() -> Decomposition {
        decompose(&SparseSystem::from_triplets(2, [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]).unwrap())
            .unwrap()
    }

    fn stats(d: &Decomposition, v: &SparseVector) -> VecStats {
        VecStats::of(d, v)
    }

    #[test]
    fn hoeffding_scaling_in_epsilon() {
        let d = edge();
        let v = SparseVector::from_dense(&[1.0, -1.0]).unwrap();
        let mut req = PlanRequest::new(1.0, 0.01);
        req.length = Some(10);
        let p1 = plan(&d, &stats(&d, &v), &stats(&d, &v), &req, Regime::Hoeffding).unwrap();
        req.epsilon = 0.08;
        let p2 = plan(&d, &stats(&d, &v), &stats(&d, &v), &req, Regime::Hoeffding).unwrap();
        assert!((p2.r_max / p1.r_max - 4.0).abs() < 1e-12);
        // n_s tracks r_max^2 / eps^2 in both, up to rounding up
        for (p, e) in [(&p1, 0.01), (&p2, 0.08)] {
            let exact = HOEFFDING_C * (2.0 * 100.0 * p.r_max / e).powi(2);
            assert!(p.n_s as f64 >= exact && (p.n_s as f64) < exact + 1.0);
        }
    }

    #[test]
    fn hoeffding_total_matches_closed_form() {
        let d = edge();
        let v = SparseVector::from_dense(&[1.0, -1.0]).unwrap();
        let (bs, ts) = (stats(&d, &v), stats(&d, &v));
        let mut req = PlanRequest::new(1.0, 1e-3);
        req.length = Some(12);
        let p = plan(&d, &bs, &ts, &req, Regime::Hoeffding).unwrap();
        let closed = hoeffding_cost(&d, &bs, &ts, 12, 1e-3);
        // n_s is rounded up; the rest is exact
        assert!((p.predicted_total() / closed - 1.0).abs() < 1e-3);
        let q = plan(&d, &bs, &ts, &req, Regime::Variance).unwrap();
        assert!((q.predicted_total() / variance_cost(&d, &bs, &ts, 12, 1e-3) - 1.0).abs() < 1e-3);
        let best = plan_auto(&d, &bs, &ts, &req).unwrap();
        assert_eq!(best.predicted_total(), p.predicted_total().min(q.predicted_total()));
    }

    #[test]
    fn relative_regimes_need_eta() {
        let d = edge();
        let v = SparseVector::unit(2, 0, 1.0).unwrap();
        let req = PlanRequest::new(1.0, 0.1);
        let e = plan(&d, &stats(&d, &v), &stats(&d, &v), &req, Regime::RelativeRcddz).unwrap_err();
        assert_eq!(e, Error::MissingEta);
    }

    #[test]
    fn no_push_limit_equals_pure_walks() {
        let d = edge();
        let b = SparseVector::from_dense(&[0.7, -0.2]).unwrap();
        let t = SparseVector::from_dense(&[1.0, 0.5]).unwrap();
        let p = BidiPlan {
            regime: Regime::Hoeffding,
            r_max: 10.0,
            n_s: 30_000,
            length: 6,
            error_target: 0.0,
            sample_constant: HOEFFDING_C,
            predicted_push: 0.0,
            predicted_walk: 0.0,
            rationale: String::new(),
        };
        let bi = estimate(&d, &b, &t, &p, 77, 1).unwrap();
        let params = SolverParams::new(1.0, 0.1, 6).with_samples(30_000).with_seed(77);
        let walk = estimate_abs(&d, &b, &t, &params).unwrap();
        assert_eq!(bi.report.cost.push_work, 0);
        assert_eq!(bi.value.to_bits(), walk.value.to_bits());
    }

    #[test]
    fn exhaustive_push_limit_equals_push() {
        let d = edge();
        let b = SparseVector::from_dense(&[0.7, -0.2]).unwrap();
        let t = SparseVector::from_dense(&[1.0, 0.5]).unwrap();
        let p = BidiPlan {
            regime: Regime::Hoeffding,
            r_max: 0.0,
            n_s: 1000,
            length: 6,
            error_target: 0.0,
            sample_constant: HOEFFDING_C,
            predicted_push: 0.0,
            predicted_walk: 0.0,
            rationale: String::new(),
        };
        let bi = estimate(&d, &b, &t, &p, 1, 1).unwrap();
        let state = push_run(&d, &b, 6, 0.0).unwrap();
        assert_eq!(bi.value, push_estimate(&state, &t).unwrap());
    }

    #[test]
    fn edge_resistance_bidirectional() {
        let d = edge();
        let v = SparseVector::from_dense(&[1.0, -1.0]).unwrap();
        let req = PlanRequest::new(1.0, 0.2);
        let p = plan(&d, &stats(&d, &v), &stats(&d, &v), &req, Regime::Hoeffding).unwrap();
        let e = estimate(&d, &v, &v, &p, 3, 1).unwrap();
        assert!((e.value - 1.0).abs() <= 0.2, "{}", e.value);
    }
}
