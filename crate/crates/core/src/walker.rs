//! Signed lazy random walks and the Monte Carlo estimators of `t^T x*`.
//!
//! A walk starts at a coordinate drawn with probability `|t(k)| / ||t||_1`, picks a length
//! `l` uniformly in `0..L`, and takes `l` steps of the lazy walk: stay with probability
//! 1/2, move to `u` with probability `|A(u,v)| / (2 d(v))` flipping the sign when the entry
//! is negative, and get absorbed with whatever probability is left.

use std::time::Instant;

use rand::Rng;

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::report::{Estimate, Report};
use crate::rng::{derive_seed, run_blocks, substream, StreamRng, Tally, BLOCK_LEN};
use crate::system::{Decomposition, SolverParams, VecStats};
use crate::vector::SparseVector;

/// Constant in the Hoeffding sample count `c ||t||_1^2 L^2 / eps^2` (failure 1/4).
pub const HOEFFDING_C: f64 = 8.0 * std::f64::consts::LN_2 * 3.0;
/// Constant in the Chebyshev sample count `c ||t||_1^2 L / eps^2`.
pub const CHEBYSHEV_C: f64 = 16.0;
/// Failure probability of the stopping rule.
pub const STOPPING_DELTA: f64 = 0.25;

/// Outcome of one step of the lazy walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Stay,
    /// Move to the coordinate, multiplying the running sign by the second field.
    Move(usize, i8),
    Absorb,
}

/// One walk: its length, where it ended (`None` if absorbed), its sign and its value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkSample {
    pub length: usize,
    pub terminal: Option<usize>,
    pub sign: i8,
    pub value: f64,
}

/// Draws a coordinate with probability proportional to `|v(k)|`, with its sign.
#[derive(Clone, Debug)]
pub struct SourceSampler {
    idx: Vec<usize>,
    sign: Vec<i8>,
    table: AliasTable,
    total: f64,
}

impl SourceSampler {
    pub fn new(v: &SparseVector) -> Result<Self> {
        if v.is_zero() {
            return Err(Error::ZeroT);
        }
        let weights: Vec<f64> = v.values().iter().map(|x| x.abs()).collect();
        Ok(SourceSampler {
            idx: v.indices().to_vec(),
            sign: v.values().iter().map(|x| if *x > 0.0 { 1 } else { -1 }).collect(),
            table: AliasTable::new(&weights)?,
            total: v.l1(),
        })
    }

    /// `||v||_1`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, i8) {
        let i = self.table.sample(rng);
        (self.idx[i], self.sign[i])
    }
}

/// The step taken from `v` for a uniform draw `u` in `[0,1)`.
pub(crate) fn step_with(dec: &Decomposition, v: usize, u: f64) -> Step {
    if u < 0.5 {
        return Step::Stay;
    }
    let w = (u - 0.5) * 2.0 * dec.diag(v);
    let (idx, val) = dec.offdiag().row(v);
    let mut acc = 0.0;
    for (&k, &a) in idx.iter().zip(val) {
        acc += a.abs();
        if w < acc {
            return Step::Move(k, if a > 0.0 { 1 } else { -1 });
        }
    }
    Step::Absorb
}

/// One step of the lazy walk from `v`.
pub fn step<R: Rng + ?Sized>(dec: &Decomposition, v: usize, rng: &mut R) -> Result<Step> {
    dec.check_rdd()?;
    if v >= dec.dim() {
        return Err(Error::IndexOutOfRange { index: v, n: dec.dim() });
    }
    Ok(step_with(dec, v, rng.random::<f64>()))
}

/// Runs one walk. The value is `sign * scale * weight(l, v)` for terminal `v`; also
/// returns the number of steps taken.
pub(crate) fn walk<R, W>(
    dec: &Decomposition,
    source: &SourceSampler,
    length: usize,
    scale: f64,
    weight: &W,
    rng: &mut R,
) -> (WalkSample, u64)
where
    R: Rng + ?Sized,
    W: Fn(usize, usize) -> f64,
{
    let l = rng.random_range(0..length);
    let (mut v, mut sign) = source.sample(rng);
    for taken in 0..l {
        match step_with(dec, v, rng.random::<f64>()) {
            Step::Stay => {}
            Step::Move(u, s) => {
                v = u;
                sign *= s;
            }
            Step::Absorb => {
                let s = WalkSample { length: l, terminal: None, sign: 0, value: 0.0 };
                return (s, taken as u64 + 1);
            }
        }
    }
    let value = f64::from(sign) * (scale * weight(l, v));
    (WalkSample { length: l, terminal: Some(v), sign, value }, l as u64)
}

fn dinv_weight<'a>(dec: &'a Decomposition, b: &'a SparseVector) -> impl Fn(usize, usize) -> f64 + Sync + 'a {
    move |_, v| b.get(v) / dec.diag(v)
}

fn check_inputs(dec: &Decomposition, b: &SparseVector, t: &SparseVector, params: &SolverParams) -> Result<()> {
    params.validate()?;
    b.check_dim(dec.dim())?;
    t.check_dim(dec.dim())?;
    if t.is_zero() {
        return Err(Error::ZeroT);
    }
    Ok(())
}

fn check_nonnegative(dec: &Decomposition, b: &SparseVector, t: &SparseVector) -> Result<()> {
    if !dec.class().rddz() {
        return Err(Error::NotRddz);
    }
    if let Some(k) = b.first_negative().or(t.first_negative()) {
        return Err(Error::NegativeInput(k));
    }
    Ok(())
}

pub(crate) fn sample_count(x: f64, cap: u64) -> Result<u64> {
    let n = x.ceil().max(1.0);
    if !(n <= cap as f64) {
        return Err(Error::BudgetExhausted(cap));
    }
    Ok(n as u64)
}

/// `ceil(8 ln 8 ||t||_1^2 L^2 / eps^2)`.
pub fn hoeffding_samples(t_l1: f64, length: usize, epsilon: f64) -> f64 {
    (HOEFFDING_C * (t_l1 * length as f64 / epsilon).powi(2)).ceil()
}

/// `ceil(16 ||t||_1^2 L / eps^2)`.
pub fn chebyshev_samples(t_l1: f64, length: usize, epsilon: f64) -> f64 {
    (CHEBYSHEV_C * t_l1 * t_l1 * length as f64 / (epsilon * epsilon)).ceil()
}

/// `n` walks of `t` against `b`, without averaging. Mostly for tests and diagnostics.
pub fn draw_samples(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    length: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<WalkSample>> {
    dec.check_rdd()?;
    check_inputs(dec, b, t, &SolverParams::new(1.0, 1.0, length))?;
    let source = SourceSampler::new(t)?;
    let scale = 0.5 * source.total() * length as f64;
    let weight = dinv_weight(dec, b);
    let mut rng = substream(seed, 0);
    Ok((0..n).map(|_| walk(dec, &source, length, scale, &weight, &mut rng).0).collect())
}

/// Mean of `n` walks, evaluated in parallel blocks.
pub(crate) fn mean_of_walks<W>(
    dec: &Decomposition,
    source: &SourceSampler,
    length: usize,
    scale: f64,
    weight: &W,
    n: u64,
    seed: u64,
) -> Tally
where
    W: Fn(usize, usize) -> f64 + Sync,
{
    run_blocks(seed, n, |rng, tally| {
        let (s, steps) = walk(dec, source, length, scale, weight, rng);
        tally.record(s.value, steps, s.terminal.is_none())
    })
}

/// Seed of repetition `r`; the first repetition uses the run seed itself.
pub(crate) fn repeat_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        derive_seed(seed, r as u64)
    }
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median over `params.repeats` independent runs of `f(seed)`, with their tallies merged.
pub(crate) fn repeated<F>(params: &SolverParams, mut f: F) -> Result<(f64, Tally)>
where
    F: FnMut(u64) -> Result<(f64, Tally)>,
{
    let mut values = Vec::with_capacity(params.repeats);
    let mut total = Tally::default();
    for r in 0..params.repeats {
        let (v, t) = f(repeat_seed(params.seed, r))?;
        values.push(v);
        total = Tally::merge(total, t);
    }
    Ok((median(values), total))
}

fn fill_common(report: &mut Report, params: &SolverParams, tally: &Tally, n_s: u64) {
    report
        .param("gamma", params.gamma)
        .param("epsilon", params.epsilon)
        .param("L", params.length as f64)
        .param("repeats", params.repeats as f64)
        .detail("sample_mean", tally.mean())
        .detail("sample_variance", tally.variance())
        .detail("absorb_rate", if tally.count == 0 { 0.0 } else { tally.absorbed as f64 / tally.count as f64 });
    report.cost.n_s = n_s;
    report.cost.walk_steps = tally.steps;
}

/// Estimate of `t^T x*` within `eps ||D^{-1} b||_inf` with probability 3/4 (per repeat).
pub fn estimate_abs(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    params: &SolverParams,
) -> Result<Estimate> {
    let start = Instant::now();
    dec.check_rdd()?;
    check_inputs(dec, b, t, params)?;
    let source = SourceSampler::new(t)?;
    let len = params.length;
    let n_s = match params.samples {
        Some(n) => n.max(1),
        None => sample_count(hoeffding_samples(source.total(), len, params.epsilon), params.sample_cap)?,
    };
    let scale = 0.5 * source.total() * len as f64;
    let weight = dinv_weight(dec, b);
    let (value, tally) = repeated(params, |seed| {
        let t = mean_of_walks(dec, &source, len, scale, &weight, n_s, seed);
        Ok((t.mean(), t))
    })?;
    let bs = VecStats::of(dec, b);
    let mut report = Report::new("walk_abs", params.seed);
    report.estimate = value;
    report.error_target = params.epsilon * bs.dinv_inf;
    fill_common(&mut report, params, &tally, n_s);
    report.param("sample_constant", HOEFFDING_C).detail("value_bound", scale * bs.dinv_inf);
    report.finish(start);
    Ok(Estimate { value, report })
}

/// Estimate of `t^T x*` within `eps ||x*||_inf` for RDDZ systems with `b, t >= 0`.
///
/// The reported error target is `eps ||D^{-1} b||_inf / 2`, which never exceeds
/// `eps ||x*||_inf` on these systems.
pub fn estimate_inf_relative(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    params: &SolverParams,
) -> Result<Estimate> {
    let start = Instant::now();
    check_nonnegative(dec, b, t)?;
    check_inputs(dec, b, t, params)?;
    let source = SourceSampler::new(t)?;
    let len = params.length;
    let n_s = match params.samples {
        Some(n) => n.max(1),
        None => sample_count(chebyshev_samples(source.total(), len, params.epsilon), params.sample_cap)?,
    };
    let scale = 0.5 * source.total() * len as f64;
    let weight = dinv_weight(dec, b);
    let (value, tally) = repeated(params, |seed| {
        let t = mean_of_walks(dec, &source, len, scale, &weight, n_s, seed);
        Ok((t.mean(), t))
    })?;
    let bs = VecStats::of(dec, b);
    let mut report = Report::new("walk_inf_relative", params.seed);
    report.estimate = value;
    report.error_target = 0.5 * params.epsilon * bs.dinv_inf;
    fill_common(&mut report, params, &tally, n_s);
    report.param("sample_constant", CHEBYSHEV_C);
    report.finish(start);
    Ok(Estimate { value, report })
}

/// `Upsilon_1 = 1 + (1 + e) 4 (e_const - 2) ln(2 / delta) / e^2`, the sum the stopping
/// rule waits for, at accuracy `e`.
pub fn stopping_threshold(accuracy: f64) -> f64 {
    let upsilon = 4.0 * (std::f64::consts::E - 2.0) * (2.0 / STOPPING_DELTA).ln() / (accuracy * accuracy);
    1.0 + (1.0 + accuracy) * upsilon
}

/// Samples a stream of `[0,1]` values until their sum reaches `threshold`; returns the
/// number of samples used and a tally over them. Blocks are generated in parallel batches
/// but scanned in order, so the stopping index does not depend on the thread count.
pub(crate) fn stopping_rule<F>(seed: u64, threshold: f64, cap: u64, sample: F) -> Result<(u64, Tally)>
where
    F: Fn(&mut StreamRng) -> (f64, u64, bool) + Sync,
{
    use rayon::prelude::*;
    let batch = rayon::current_num_threads().max(1) as u64 * 2;
    let mut next_block = 0u64;
    let mut sum = 0.0;
    let mut tally = Tally::default();
    loop {
        let blocks: Vec<Vec<(f64, u64, bool)>> = (next_block..next_block + batch)
            .into_par_iter()
            .map(|blk| {
                let mut rng = substream(seed, blk);
                (0..BLOCK_LEN).map(|_| sample(&mut rng)).collect()
            })
            .collect();
        next_block += batch;
        for (z, steps, absorbed) in blocks.into_iter().flatten() {
            if tally.count >= cap {
                return Err(Error::BudgetExhausted(cap));
            }
            tally.record(z, steps, absorbed);
            sum += z;
            if sum >= threshold {
                return Ok((tally.count, tally));
            }
        }
    }
}

/// Estimate of `t^T x*` within a factor `1 +- eps` for RDDZ systems with `b, t >= 0`,
/// using a sequential stopping rule. Expected work scales with `1 / t^T x*`.
pub fn estimate_relative(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    params: &SolverParams,
) -> Result<Estimate> {
    let start = Instant::now();
    check_nonnegative(dec, b, t)?;
    check_inputs(dec, b, t, params)?;
    let source = SourceSampler::new(t)?;
    let len = params.length;
    let computed = VecStats::of(dec, b).dinv_inf;
    let bound = params.dinv_b_bound.unwrap_or(computed);
    if !(bound > 0.0) {
        return Err(Error::BudgetExhausted(params.sample_cap));
    }
    let scale = 0.5 * source.total() * len as f64 * bound;
    let weight = dinv_weight(dec, b);
    let accuracy = params.epsilon / 2.0;
    let threshold = stopping_threshold(accuracy);
    let (value, tally) = repeated(params, |seed| {
        let (n, tally) = stopping_rule(seed, threshold, params.sample_cap, |rng| {
            let (s, steps) = walk(dec, &source, len, 1.0, &weight, rng);
            ((s.value / bound).clamp(0.0, 1.0), steps, s.terminal.is_none())
        })?;
        Ok((threshold / n as f64 * scale, tally))
    })?;
    let mut report = Report::new("walk_relative", params.seed);
    report.estimate = value;
    report.error_target = params.epsilon;
    fill_common(&mut report, params, &tally, tally.count);
    report
        .detail("stopping_threshold", threshold)
        .detail("value_scale", scale)
        .detail("dinv_b_bound", bound)
        .note("dinv_b_bound", if params.dinv_b_bound.is_some() { "supplied" } else { "computed" });
    report.finish(start);
    Ok(Estimate { value, report })
}

/// The RDD view of a CDD problem: estimating `b^T (M^T)^{-1} t` on the transposed split
/// gives the same number as `t^T M^{-1} b`, truncation included.
pub fn transpose_mode(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
) -> Result<(Decomposition, SparseVector, SparseVector)> {
    if !dec.class().cdd {
        return Err(Error::NotCdd);
    }
    Ok((dec.transposed(), t.clone(), b.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{decompose, SparseSystem};

    fn two_cycle() -> Decomposition {
        decompose(&SparseSystem::from_triplets(2, [(0, 0, 1.0), (0, 1, -0.8), (1, 0, -0.8), (1, 1, 1.0)]).unwrap())
            .unwrap()
    }

    fn edge() -> Decomposition {
        decompose(&SparseSystem::from_triplets(2, [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]).unwrap())
            .unwrap()
    }

    #[test]
    fn hoeffding_constant_value() {
        assert!((HOEFFDING_C - 8.0 * 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn step_frequencies_on_two_cycle() {
        let d = two_cycle();
        let mut rng = substream(3, 0);
        let n = 100_000;
        let (mut stay, mut mv, mut ab) = (0, 0, 0);
        for _ in 0..n {
            match step(&d, 0, &mut rng).unwrap() {
                Step::Stay => stay += 1,
                Step::Move(1, 1) => mv += 1,
                Step::Absorb => ab += 1,
                s => panic!("unexpected step {s:?}"),
            }
        }
        for (c, p) in [(stay, 0.5), (mv, 0.4), (ab, 0.1)] {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() <= 3.0 * sd, "{c} vs {p}");
        }
    }

    #[test]
    fn empty_row_absorbs_half_the_time() {
        let d = decompose(&SparseSystem::identity(1)).unwrap();
        assert_eq!(step_with(&d, 0, 0.25), Step::Stay);
        assert_eq!(step_with(&d, 0, 0.75), Step::Absorb);
    }

    #[test]
    fn stochastic_row_never_absorbs() {
        let d = edge();
        for i in 0..1000 {
            let u = 0.5 + 0.5 * i as f64 / 1000.0;
            assert_eq!(step_with(&d, 0, u), Step::Move(1, 1));
        }
    }

    #[test]
    fn zero_b_gives_zero() {
        let d = two_cycle();
        let b = SparseVector::zeros(2);
        let t = SparseVector::unit(2, 0, 1.0).unwrap();
        let e = estimate_abs(&d, &b, &t, &SolverParams::new(0.1, 0.1, 20)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn zero_t_rejected() {
        let d = two_cycle();
        let b = SparseVector::unit(2, 0, 1.0).unwrap();
        let err = estimate_abs(&d, &b, &SparseVector::zeros(2), &SolverParams::new(0.1, 0.1, 5)).unwrap_err();
        assert_eq!(err, Error::ZeroT);
    }

    #[test]
    fn edge_resistance_by_walks() {
        let d = edge();
        let v = SparseVector::from_dense(&[1.0, -1.0]).unwrap();
        let e = estimate_abs(&d, &v, &v, &SolverParams::new(1.0, 0.25, 3)).unwrap();
        assert!((e.value - 1.0).abs() <= 0.25, "{}", e.value);
        assert_eq!(e.report.cost.n_s, hoeffding_samples(2.0, 3, 0.25) as u64);
    }

    #[test]
    fn two_cycle_pagerank_by_walks() {
        let d = two_cycle();
        let b = SparseVector::unit(2, 0, 0.2).unwrap();
        let t = SparseVector::unit(2, 0, 1.0).unwrap();
        // gap 0.1, eps 0.2
        let mut p = SolverParams::new(0.1, 0.2, 60);
        p.samples = Some(400_000);
        let e = estimate_abs(&d, &b, &t, &p).unwrap();
        assert!((e.value - 5.0 / 9.0).abs() <= 0.2 * 0.2, "{}", e.value);
    }

    #[test]
    fn seeds_are_deterministic() {
        let d = two_cycle();
        let b = SparseVector::unit(2, 0, 0.2).unwrap();
        let t = SparseVector::unit(2, 1, 1.0).unwrap();
        let p = SolverParams::new(0.1, 0.5, 30).with_samples(20_000).with_seed(9);
        let a = estimate_abs(&d, &b, &t, &p).unwrap();
        let c = estimate_abs(&d, &b, &t, &p).unwrap();
        assert_eq!(a.value.to_bits(), c.value.to_bits());
        let other = estimate_abs(&d, &b, &t, &p.clone().with_seed(10)).unwrap();
        assert_ne!(a.value.to_bits(), other.value.to_bits());
    }

    #[test]
    fn samples_are_bounded_and_signed() {
        let d = two_cycle();
        let b = SparseVector::from_dense(&[0.3, 0.1]).unwrap();
        let t = SparseVector::from_dense(&[1.0, 2.0]).unwrap();
        let len = 12;
        let bound = 0.5 * 3.0 * 0.3 * len as f64;
        for s in draw_samples(&d, &b, &t, len, 5000, 1).unwrap() {
            assert!(s.value.abs() <= bound + 1e-12);
            assert!(s.sign >= 0);
            assert_eq!(s.sign == 0, s.terminal.is_none());
        }
    }

    #[test]
    fn inf_relative_budget_is_smaller() {
        assert!(chebyshev_samples(1.0, 40, 0.1) * 10.0 < hoeffding_samples(1.0, 40, 0.1));
        let d = two_cycle();
        let b = SparseVector::from_dense(&[-0.1, 0.0]).unwrap();
        let t = SparseVector::unit(2, 0, 1.0).unwrap();
        let err = estimate_inf_relative(&d, &b, &t, &SolverParams::new(0.1, 0.1, 5)).unwrap_err();
        assert_eq!(err, Error::NegativeInput(0));
    }

    #[test]
    fn relative_with_constant_stream() {
        let d = decompose(&SparseSystem::from_triplets(2, [(0, 0, 2.0), (1, 1, 2.0)]).unwrap()).unwrap();
        let b = SparseVector::constant(2, 3.0);
        let t = SparseVector::unit(2, 1, 1.0).unwrap();
        let e = estimate_relative(&d, &b, &t, &SolverParams::new(0.5, 0.2, 1)).unwrap();
        let want = 0.5 * 1.5;
        assert!((e.value / want - 1.0).abs() <= 0.1, "{}", e.value);
        let thr = stopping_threshold(0.1);
        assert_eq!(e.report.cost.n_s, thr.ceil() as u64);
    }

    #[test]
    fn relative_exhausts_budget_when_target_is_zero() {
        let d = two_cycle();
        let b = SparseVector::unit(2, 0, 0.2).unwrap();
        let t = SparseVector::unit(2, 1, 1.0).unwrap();
        let mut p = SolverParams::new(0.1, 0.5, 1);
        p.sample_cap = 10_000;
        assert_eq!(estimate_relative(&d, &b, &t, &p).unwrap_err(), Error::BudgetExhausted(10_000));
    }

    #[test]
    fn transpose_requires_cdd_and_is_an_involution() {
        let d = decompose(&SparseSystem::from_triplets(2, [(0, 0, 1.0), (1, 0, -2.0), (1, 1, 3.0)]).unwrap()).unwrap();
        let b = SparseVector::unit(2, 0, 1.0).unwrap();
        let t = SparseVector::unit(2, 1, 1.0).unwrap();
        assert_eq!(transpose_mode(&d, &b, &t).unwrap_err(), Error::NotCdd);
        let d = two_cycle();
        let (d1, b1, t1) = transpose_mode(&d, &b, &t).unwrap();
        let (d2, b2, t2) = transpose_mode(&d1, &b1, &t1).unwrap();
        assert_eq!(b2, b);
        assert_eq!(t2, t);
        assert_eq!(d2.offdiag(), d.offdiag());
    }
}
