//! Effective resistance `R(s,t) = (e_s - e_t)^T L^+ (e_s - e_t)` on undirected graphs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::bidirectional::{self, PlanRequest, Regime};
use crate::error::{Error, Result};
use crate::oracle::pseudoinverse_solution;
use crate::push::push_solve;
use crate::report::Estimate;
use crate::system::{decompose, resistance_truncation_length, Decomposition, SolverParams, VecStats};
use crate::vector::SparseVector;
use crate::walker::estimate_abs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceMethod {
    Walk,
    Push,
    BidiHoeffding,
    BidiVariance,
    /// Whichever of the four has the smallest predicted cost.
    Auto,
}

impl ResistanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ResistanceMethod::Walk => "walk",
            ResistanceMethod::Push => "push",
            ResistanceMethod::BidiHoeffding => "bidi_hoeffding",
            ResistanceMethod::BidiVariance => "bidi_variance",
            ResistanceMethod::Auto => "auto",
        }
    }
}

/// Checks the graph and endpoints; returns the Laplacian split and `e_s - e_t`.
pub fn resistance_system(g: &Graph, s: usize, t: usize) -> Result<(Decomposition, SparseVector)> {
    g.check_node(s)?;
    g.check_node(t)?;
    if s == t {
        return Err(Error::SameEndpoints);
    }
    if !g.is_undirected() {
        return Err(Error::NotUndirected);
    }
    if !g.is_weakly_connected() {
        return Err(Error::Disconnected);
    }
    let dec = decompose(&g.laplacian()?)?;
    let v = SparseVector::from_pairs(g.n(), [(s, 1.0), (t, -1.0)])?;
    Ok((dec, v))
}

/// Predicted costs `[walk, push, bidi_hoeffding, bidi_variance]` up to constants, for
/// absolute error `eps`, length `L` and `md = min(d(s), d(t))`.
pub fn predicted_costs(length: usize, eps: f64, md: f64) -> [f64; 4] {
    let l = length as f64;
    [
        l.powi(3) / (eps * eps * md * md),
        l.powi(3) / eps,
        l.powf(7.0 / 3.0) / eps.powf(2.0 / 3.0),
        l.powf(2.5) / (eps * md.sqrt()),
    ]
}

/// Estimate of `R(s,t)` within `epsilon` (absolute), or within `epsilon R(s,t)` when
/// `relative` is set, using `R >= 1 / (2 min(d(s), d(t)))`.
#[allow(clippy::too_many_arguments)]
pub fn effective_resistance(
    g: &Graph,
    s: usize,
    t: usize,
    gamma: f64,
    epsilon: f64,
    method: ResistanceMethod,
    relative: bool,
    seed: u64,
) -> Result<Estimate> {
    let start = Instant::now();
    let (dec, v) = resistance_system(g, s, t)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let (ds, dt) = (dec.diag(s), dec.diag(t));
    let md = ds.min(dt);
    let eps_abs = if relative { epsilon / (2.0 * md) } else { epsilon };
    let length = resistance_truncation_length(gamma, eps_abs, ds, dt)?;
    let chosen = match method {
        ResistanceMethod::Auto => {
            let costs = predicted_costs(length, eps_abs, md);
            let i = (0..4).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).expect("four candidates");
            [
                ResistanceMethod::Walk,
                ResistanceMethod::Push,
                ResistanceMethod::BidiHoeffding,
                ResistanceMethod::BidiVariance,
            ][i]
        }
        m => m,
    };
    let mut est = match chosen {
        ResistanceMethod::Walk => {
            // the walk bound is eps ||D^{-1} b||_inf = eps / md
            let params = SolverParams::new(gamma, eps_abs * md, length).with_seed(seed);
            estimate_abs(&dec, &v, &v, &params)?
        }
        ResistanceMethod::Push => push_solve(&dec, &v, &v, length, 0.5 * eps_abs / (length * length) as f64)?,
        ResistanceMethod::BidiHoeffding | ResistanceMethod::BidiVariance => {
            let regime = if chosen == ResistanceMethod::BidiHoeffding { Regime::Hoeffding } else { Regime::Variance };
            let mut req = PlanRequest::new(gamma, eps_abs);
            req.length = Some(length);
            let stats = VecStats::of(&dec, &v);
            let plan = bidirectional::plan(&dec, &stats, &stats, &req, regime)?;
            bidirectional::estimate(&dec, &v, &v, &plan, seed, 1)?
        }
        ResistanceMethod::Auto => unreachable!("auto resolved above"),
    };
    let report = &mut est.report;
    report.method = format!("effres_{}", chosen.name());
    report.seed = seed;
    report.error_target = if relative { epsilon } else { eps_abs };
    report
        .param("gamma", gamma)
        .param("epsilon", epsilon)
        .param("L", length as f64)
        .param("s", s as f64)
        .param("t", t as f64)
        .detail("eps_abs", eps_abs)
        .note("mode", if relative { "relative" } else { "absolute" })
        .note("requested_method", method.name());
    report.finish(start);
    Ok(est)
}

/// `R(s,t)` from the dense pseudoinverse.
pub fn dense_resistance(g: &Graph, s: usize, t: usize) -> Result<f64> {
    let (dec, v) = resistance_system(g, s, t)?;
    let x = pseudoinverse_solution(&dec, &v.to_dense())?;
    Ok(x[s] - x[t])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{complete, path};
    use crate::oracle::spectral_gap_sdd;

    #[test]
    fn dense_values() {
        assert!((dense_resistance(&path(2), 0, 1).unwrap() - 1.0).abs() < 1e-10);
        assert!((dense_resistance(&path(4), 0, 3).unwrap() - 3.0).abs() < 1e-9);
        assert!((dense_resistance(&complete(4), 1, 2).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn push_on_single_edge() {
        let g = path(2);
        let e = effective_resistance(&g, 0, 1, 1.0, 0.1, ResistanceMethod::Push, false, 0).unwrap();
        assert!((e.value - 1.0).abs() <= 0.1, "{}", e.value);
    }

    #[test]
    fn every_method_on_path() {
        let g = path(4);
        let (dec, _) = resistance_system(&g, 0, 3).unwrap();
        let gamma = spectral_gap_sdd(&dec).unwrap();
        for m in [
            ResistanceMethod::Walk,
            ResistanceMethod::Push,
            ResistanceMethod::BidiHoeffding,
            ResistanceMethod::BidiVariance,
            ResistanceMethod::Auto,
        ] {
            let e = effective_resistance(&g, 0, 3, gamma, 0.3, m, false, 4).unwrap();
            assert!((e.value - 3.0).abs() <= 0.3, "{m:?}: {}", e.value);
        }
    }

    #[test]
    fn input_checks() {
        let g = path(3);
        assert_eq!(
            effective_resistance(&g, 1, 1, 0.5, 0.1, ResistanceMethod::Push, false, 0).unwrap_err(),
            Error::SameEndpoints
        );
        let d = Graph::from_arcs(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(resistance_system(&d, 0, 1).unwrap_err(), Error::NotUndirected);
        let split = Graph::undirected(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(resistance_system(&split, 0, 3).unwrap_err(), Error::Disconnected);
    }
}
