//! Leveled push: deterministic local relaxation of the truncated series.
//!
//! Level `l` holds a reserve `p^l` and a residue `r^l`. Pushing `v` at level `l` moves
//! `r^l(v)` into `p^l(v)` and spreads `B e_v r^l(v)` into `r^{l+1}`, with
//! `B = 1/2 (I + D^{-1} A^T)`. At every point
//! `sum_{j<L} B^j D^{-1} b = sum_l p^l + sum_l sum_{j <= L-1-l} B^j r^l`.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{abs_lazy_operator, lazy_operator, operator_series};
use crate::report::{Estimate, Report};
use crate::system::{truncation_length, Decomposition, GapMode, VecStats};
use crate::vector::SparseVector;

/// Entries smaller than this are dropped from the maps.
pub const DROP_BELOW: f64 = 1e-300;

/// Order in which the super-threshold coordinates of a level are pushed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PushOrder {
    #[default]
    Ascending,
    Descending,
}

/// Reserves, residues and work counters of a push run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushState {
    pub n: usize,
    pub length: usize,
    pub r_max: f64,
    pub reserves: Vec<BTreeMap<usize, f64>>,
    pub residues: Vec<BTreeMap<usize, f64>>,
    pub pushes_per_coord: BTreeMap<usize, u64>,
    pub push_count: u64,
    /// Sum over pushes of the nonzero count of the pushed column of `M`.
    pub work_units: u64,
}

impl PushState {
    /// The state before any push: `r^0 = D^{-1} b`.
    pub fn initial(dec: &Decomposition, b: &SparseVector, length: usize, r_max: f64) -> Result<Self> {
        b.check_dim(dec.dim())?;
        if length == 0 {
            return Err(Error::InvalidParameter("truncation length must be at least 1".into()));
        }
        if !(r_max >= 0.0) {
            return Err(Error::InvalidParameter(format!("r_max must be nonnegative, got {r_max}")));
        }
        let mut residues = vec![BTreeMap::new(); length];
        for (k, x) in b.iter() {
            residues[0].insert(k, x / dec.diag(k));
        }
        Ok(PushState {
            n: dec.dim(),
            length,
            r_max,
            reserves: vec![BTreeMap::new(); length],
            residues,
            pushes_per_coord: BTreeMap::new(),
            push_count: 0,
            work_units: 0,
        })
    }

    fn push(&mut self, dec: &Decomposition, level: usize, v: usize) {
        let Some(r) = self.residues[level].remove(&v) else { return };
        *self.reserves[level].entry(v).or_insert(0.0) += r;
        let next = &mut self.residues[level + 1];
        add(next, v, 0.5 * r);
        let (idx, val) = dec.offdiag().col(v);
        for (&u, &a) in idx.iter().zip(val) {
            add(next, u, 0.5 * a / dec.diag(u) * r);
        }
        *self.pushes_per_coord.entry(v).or_insert(0) += 1;
        self.push_count += 1;
        self.work_units += dec.column_nnz(v) as u64;
    }

    /// Residue at `(level, v)`.
    pub fn residue(&self, level: usize, v: usize) -> f64 {
        self.residues.get(level).and_then(|m| m.get(&v)).copied().unwrap_or(0.0)
    }

    pub fn reserve(&self, level: usize, v: usize) -> f64 {
        self.reserves.get(level).and_then(|m| m.get(&v)).copied().unwrap_or(0.0)
    }

    /// Largest `|r^l(v)|` over levels `0..=L-2`.
    pub fn max_relaxed_residue(&self) -> f64 {
        let last = self.length.saturating_sub(1);
        self.residues[..last].iter().flat_map(|m| m.values()).fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn add(map: &mut BTreeMap<usize, f64>, k: usize, x: f64) {
    let e = map.entry(k).or_insert(0.0);
    *e += x;
    if e.abs() < DROP_BELOW {
        map.remove(&k);
    }
}

/// Runs push with threshold `r_max` over levels `0..L-1`.
pub fn push_run(dec: &Decomposition, b: &SparseVector, length: usize, r_max: f64) -> Result<PushState> {
    push_run_with(dec, b, length, r_max, PushOrder::Ascending, |_| {})
}

/// [`push_run`] with a chosen in-level order and a callback invoked after every push.
pub fn push_run_with<F>(
    dec: &Decomposition,
    b: &SparseVector,
    length: usize,
    r_max: f64,
    order: PushOrder,
    mut observer: F,
) -> Result<PushState>
where
    F: FnMut(&PushState),
{
    let mut state = PushState::initial(dec, b, length, r_max)?;
    for level in 0..length - 1 {
        // pushes only feed level + 1, so one pass clears the level
        let mut queue: Vec<usize> =
            state.residues[level].iter().filter(|(_, r)| r.abs() > r_max).map(|(&v, _)| v).collect();
        if order == PushOrder::Descending {
            queue.reverse();
        }
        for v in queue {
            state.push(dec, level, v);
            observer(&state);
        }
    }
    Ok(state)
}

/// `1/2 t^T (sum_l p^l + r^{L-1})`.
pub fn push_estimate(state: &PushState, t: &SparseVector) -> Result<f64> {
    t.check_dim(state.n)?;
    let last = state.length - 1;
    let mut acc = 0.0;
    for (k, x) in t.iter() {
        let p: f64 = state.reserves.iter().map(|m| m.get(&k).copied().unwrap_or(0.0)).sum();
        acc += x * (p + state.residue(last, k));
    }
    Ok(0.5 * acc)
}

/// `sum_{l=0}^{min(L-1-level, L-2)} r^l(v)`, the residue mass a walk of length `level`
/// ending at `v` still has to account for.
pub fn residue_prefix(state: &PushState, level: usize, v: usize) -> Result<f64> {
    if level >= state.length {
        return Err(Error::IndexOutOfRange { index: level, n: state.length });
    }
    if v >= state.n {
        return Err(Error::IndexOutOfRange { index: v, n: state.n });
    }
    Ok(prefix_unchecked(state, level, v))
}

pub(crate) fn prefix_unchecked(state: &PushState, level: usize, v: usize) -> f64 {
    let top = (state.length - 1 - level).min(state.length.saturating_sub(2));
    if state.length < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for l in 0..=top {
        if let Some(r) = state.residues[l].get(&v) {
            acc += r;
        }
    }
    acc
}

fn dense_of(map: &BTreeMap<usize, f64>, n: usize, f: impl Fn(f64) -> f64) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    for (&k, &x) in map {
        v[k] = f(x);
    }
    v
}

/// Both sides of the push invariant, densely: `(lhs, rhs)`.
fn invariant_sides(
    state: &PushState,
    dec: &Decomposition,
    b: &SparseVector,
    f: impl Fn(f64) -> f64 + Copy,
    abs: bool,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = dec.dim();
    b.check_dim(n)?;
    if state.n != n {
        return Err(Error::DimensionMismatch { expected: n, found: state.n });
    }
    let op = if abs { abs_lazy_operator(dec)? } else { lazy_operator(dec)? };
    let len = state.length;
    let y = DVector::from_iterator(n, (0..n).map(|k| f(b.get(k)) / dec.diag(k)));
    let lhs = operator_series(&op, &y, len);
    // sum_j B^j c_j with c_j = sum_{l <= L-1-j} r^l, by Horner from j = L-1 down
    let mut prefix = vec![DVector::zeros(n); len];
    let mut run = DVector::zeros(n);
    for (l, m) in state.residues.iter().enumerate() {
        run += dense_of(m, n, f);
        prefix[l] = run.clone();
    }
    let mut acc = prefix[0].clone();
    for j in (0..len - 1).rev() {
        acc = &prefix[len - 1 - j] + &op * acc;
    }
    for m in &state.reserves {
        acc += dense_of(m, n, f);
    }
    Ok((lhs, acc))
}

/// Max-abs gap between the two sides of the push invariant.
pub fn verify_invariant(state: &PushState, dec: &Decomposition, b: &SparseVector) -> Result<f64> {
    let (lhs, rhs) = invariant_sides(state, dec, b, |x| x, false)?;
    Ok((lhs - rhs).amax())
}

/// Whether the entrywise inequality with `|A|`, `|b|`, `|p|`, `|r|` holds up to `1e-10`
/// relative slack.
pub fn verify_invariant_inequality(state: &PushState, dec: &Decomposition, b: &SparseVector) -> Result<bool> {
    let (lhs, rhs) = invariant_sides(state, dec, b, f64::abs, true)?;
    Ok(lhs.iter().zip(rhs.iter()).all(|(l, r)| *r <= l + 1e-10 * (1.0 + l.abs())))
}

/// Upper bound on push work: `(1/r_max) sum_v nnz(M(.,v)) h(v)` with
/// `h = sum_{l<L} (1/2 (I + D^{-1}|A^T|))^l D^{-1}|b|`. Infinite when `r_max = 0`.
pub fn push_cost_certificate(state: &PushState, dec: &Decomposition, b: &SparseVector) -> Result<f64> {
    let n = dec.dim();
    b.check_dim(n)?;
    let op = abs_lazy_operator(dec)?;
    if state.r_max == 0.0 {
        return Ok(f64::INFINITY);
    }
    let y = DVector::from_iterator(n, (0..n).map(|k| b.get(k).abs() / dec.diag(k)));
    let h = operator_series(&op, &y, state.length);
    let s: f64 = (0..n).map(|v| dec.column_nnz(v) as f64 * h[v]).sum();
    Ok(s / state.r_max)
}

/// Whether the run stayed within `certificate + ||b||_0`.
pub fn certificate_holds(state: &PushState, certificate: f64, b: &SparseVector) -> bool {
    state.work_units as f64 <= certificate + b.nnz() as f64
}

/// `max_v nnz(M(.,v)) / d(v)`, the constant in the work bound `c ||b||_1 L / r_max`.
pub fn work_constant(dec: &Decomposition) -> f64 {
    (0..dec.dim()).map(|v| dec.column_nnz(v) as f64 / dec.diag(v)).fold(0.0, f64::max)
}

/// Push with a given `L` and `r_max`, then read off `t`.
pub fn push_solve(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    length: usize,
    r_max: f64,
) -> Result<Estimate> {
    let start = Instant::now();
    t.check_dim(dec.dim())?;
    let state = push_run(dec, b, length, r_max)?;
    let value = push_estimate(&state, t)?;
    let mut report = Report::new("push", 0);
    report.estimate = value;
    report.error_target = 0.5 * t.l1() * (length * length) as f64 * r_max;
    report.param("L", length as f64).param("r_max", r_max).detail("pushes", state.push_count as f64);
    report.cost.push_work = state.work_units;
    report.finish(start);
    Ok(Estimate { value, report })
}

/// Deterministic estimate of `t^T x*` within `eps ||t||_1` for RCDD systems.
pub fn deterministic_solve_rcdd(
    dec: &Decomposition,
    b: &SparseVector,
    t: &SparseVector,
    gamma: f64,
    epsilon: f64,
) -> Result<Estimate> {
    let start = Instant::now();
    if !dec.class().rcdd() {
        return Err(Error::NotRcdd);
    }
    b.check_dim(dec.dim())?;
    t.check_dim(dec.dim())?;
    let bs = VecStats::of(dec, b);
    let ts = VecStats::of(dec, t);
    if ts.l1 == 0.0 {
        return Ok(zero_estimate(start, gamma, epsilon));
    }
    let length = truncation_length(dec, &bs, &ts, gamma, epsilon * ts.l1, GapMode::General)?;
    let r_max = epsilon / (length * length) as f64;
    let mut est = push_solve(dec, b, t, length, r_max)?;
    let c = work_constant(dec);
    let report = &mut est.report;
    report.method = "push_rcdd".into();
    report.error_target = epsilon * ts.l1;
    report
        .param("gamma", gamma)
        .param("epsilon", epsilon)
        .detail("work_constant", c)
        .detail("work_bound", bs.nnz as f64 + c * bs.l1 * length as f64 / r_max);
    if let Some(m) = dec.offdiag().min_abs_entry() {
        report.detail("min_abs_entry", m);
        if m < 1e-3 {
            report.note("warning", format!("smallest off-diagonal magnitude {m:e}; the work bound may be loose"));
        }
    }
    report.finish(start);
    Ok(est)
}

fn zero_estimate(start: Instant, gamma: f64, epsilon: f64) -> Estimate {
    let mut report = Report::new("push_rcdd", 0);
    report.param("gamma", gamma).param("epsilon", epsilon);
    report.finish(start);
    Estimate { value: 0.0, report }
}
