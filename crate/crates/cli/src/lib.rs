//! Argument parsing, dispatch and report output for the `sublin` binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sublin::bidirectional::{self, PlanRequest, Regime};
use sublin::graph::pagerank::{self, PageRankMode, PageRankQuery};
use sublin::graph::resistance::{self, ResistanceMethod};
use sublin::graph::{self as graphs, Form};
use sublin::oracle::{self, PNorm, DENSE_CAP};
use sublin::push;
use sublin::rng::derive_seed;
use sublin::system::DEFAULT_SEED;
use sublin::{
    classify, decompose, io, truncation_length, walker, Decomposition, Estimate, GapMode, Graph, Report, SolverParams,
    SparseSystem, SparseVector, VecStats,
};

pub const CSV_HEADER: &str = "estimate,error_target,walk_steps,push_work,n_s,seed,elapsed_ms";

/// Exit code for unreadable input, bad parameters and solver errors.
pub const EXIT_INPUT: i32 = 2;
/// Exit code when an audit check fails.
pub const EXIT_AUDIT: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "sublin", version, about = "Local solvers for diagonally dominant linear systems")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Base seed; the SUBLIN_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate t^T x* for M x = b.
    Solve(SolveArgs),
    /// Estimate one PageRank value.
    Pagerank(PageRankArgs),
    /// Estimate an effective resistance.
    Effres(EffresArgs),
    /// p-norm gaps of a matrix.
    Gap(GapArgs),
    /// Dense cross-checks on matrices and graphs; the shipped fixtures by default.
    Audit(AuditArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Trials {
    /// Odd number of independent repetitions combined by their median.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Rerun this many times with derived seeds and report the success rate against the
    /// dense oracle (n <= 512 only).
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolveMethod {
    Walk,
    WalkInfRelative,
    WalkRelative,
    Push,
    PushRcdd,
    Bidirectional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Auto,
    Hoeffding,
    Variance,
    Average,
    RelativeRcddz,
    RelativeAverage,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Matrix Market file with M.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side b.
    #[arg(long)]
    pub b: PathBuf,
    /// Query vector t.
    #[arg(long)]
    pub t: PathBuf,
    #[arg(long, value_enum, default_value_t = SolveMethod::Walk)]
    pub method: SolveMethod,
    /// Plan regime for the bidirectional method.
    #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
    pub regime: RegimeArg,
    /// Gap lower bound; computed with the dense oracle when omitted and n <= 512.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Lower bound on t^T x* for relative estimators.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Truncation length override.
    #[arg(long)]
    pub length: Option<usize>,
    /// Push threshold override.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Sample count override for the walk estimators.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Upper bound on ||D^-1 b||_inf for the relative walk estimator.
    #[arg(long)]
    pub dinv_b_bound: Option<f64>,
    /// Solve a CDD system through its transpose (walk methods).
    #[arg(long)]
    pub transpose: bool,
    #[command(flatten)]
    pub trials: Trials,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    EulerianRelative,
    BoundedIndegree,
    GenericPpr,
}

#[derive(Args, Debug)]
pub struct PageRankArgs {
    /// Edge list.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    pub alpha: f64,
    #[arg(long)]
    pub target: usize,
    /// Relative accuracy.
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::GenericPpr)]
    pub mode: ModeArg,
    /// Gap lower bound (default alpha / 2).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub trials: Trials,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EffresMethod {
    Walk,
    Push,
    BidiHoeffding,
    BidiVariance,
    Auto,
}

#[derive(Args, Debug)]
pub struct EffresArgs {
    /// Undirected edge list.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = EffresMethod::Auto)]
    pub method: EffresMethod,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Treat epsilon as relative to R(s,t).
    #[arg(long)]
    pub relative: bool,
    /// Spectral gap lower bound; computed with the dense oracle when omitted and n <= 512.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub trials: Trials,
}

#[derive(Args, Debug)]
pub struct GapArgs {
    #[arg(long)]
    pub matrix: PathBuf,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Matrix Market files to audit.
    #[arg(long)]
    pub matrix: Vec<PathBuf>,
    /// Edge lists to audit.
    #[arg(long)]
    pub graph: Vec<PathBuf>,
    /// Truncation length for the push audits.
    #[arg(long, default_value_t = 12)]
    pub length: usize,
    /// Push threshold for the push audits.
    #[arg(long, default_value_t = 1e-3)]
    pub r_max: f64,
}

/// A finished command: the report to print and the exit code.
pub struct Outcome {
    pub report: Report,
    pub code: i32,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Outcome { report, code: 0 }
    }
}

/// `SUBLIN_SEED` if set, else `--seed`.
pub fn effective_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var("SUBLIN_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("SUBLIN_SEED is not an unsigned integer: {s:?}")),
        Err(_) => Ok(flag),
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let seed = effective_seed(cli.seed)?;
    match &cli.command {
        Command::Solve(a) => solve(a, seed),
        Command::Pagerank(a) => pagerank_cmd(a, seed),
        Command::Effres(a) => effres(a, seed),
        Command::Gap(a) => gap(a),
        Command::Audit(a) => audit(a),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    io::read_file(path).with_context(|| format!("reading {}", path.display()))
}

fn load_matrix(path: &Path) -> anyhow::Result<SparseSystem> {
    io::read_matrix_market(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_vector(path: &Path, n: usize) -> anyhow::Result<SparseVector> {
    io::read_vector(&read(path)?, Some(n)).with_context(|| format!("parsing {}", path.display()))
}

fn load_graph(path: &Path) -> anyhow::Result<Graph> {
    io::read_edge_list(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Runs `once` for `trials` seeds and adds the success rate against `truth`. Trial 0 uses
/// `seed` itself and is the report returned.
fn with_trials<F>(trials: u64, seed: u64, truth: Option<f64>, relative: bool, once: F) -> anyhow::Result<Report>
where
    F: Fn(u64) -> sublin::Result<Estimate>,
{
    let first = once(seed)?;
    let mut report = first.report;
    if let Some(x) = truth {
        report.detail("oracle", x);
    }
    if trials == 0 {
        return Ok(report);
    }
    let Some(truth) = truth else {
        bail!("--trials needs the dense oracle, which is limited to n <= {DENSE_CAP}");
    };
    let tol = |target: f64| if relative { target * truth.abs() } else { target };
    let mut hits = 0u64;
    for i in 0..trials {
        let (v, target) = if i == 0 {
            (first.value, report.error_target)
        } else {
            let e = once(derive_seed(seed, i))?;
            (e.value, e.report.error_target)
        };
        if (v - truth).abs() <= tol(target) {
            hits += 1;
        }
    }
    report.detail("trials", trials as f64).detail("success_rate", hits as f64 / trials as f64);
    Ok(report)
}

fn oracle_gap(dec: &Decomposition) -> anyhow::Result<f64> {
    if dec.dim() > DENSE_CAP {
        bail!("--gamma is required above n = {DENSE_CAP}");
    }
    let g = oracle::gap_max(dec)?;
    if g.value.is_nan() || g.value <= 0.0 {
        bail!("the oracle gap is {}; supply --gamma", g.value);
    }
    Ok(g.value)
}

fn solve(a: &SolveArgs, seed: u64) -> anyhow::Result<Outcome> {
    let m = load_matrix(&a.matrix)?;
    let n = m.dim();
    let mut dec = decompose(&m)?;
    let mut b = load_vector(&a.b, n)?;
    let mut t = load_vector(&a.t, n)?;
    let walk = matches!(a.method, SolveMethod::Walk | SolveMethod::WalkInfRelative | SolveMethod::WalkRelative);
    if a.transpose {
        if !walk {
            bail!("--transpose applies to the walk methods only");
        }
        (dec, b, t) = walker::transpose_mode(&dec, &b, &t)?;
    }
    let (gamma, gamma_source) = match a.gamma {
        Some(g) => (g, "supplied"),
        None => (oracle_gap(&dec)?, "oracle"),
    };
    let truth = if n <= DENSE_CAP {
        let x = oracle::exact_solution(&dec, &b.to_dense(), 1e-12)?;
        Some(t.dot_dense(&x))
    } else {
        None
    };
    let eps = a.epsilon;
    let bs = VecStats::of(&dec, &b);
    let ts = VecStats::of(&dec, &t);
    let length_for = |target: f64| -> anyhow::Result<usize> {
        Ok(match a.length {
            Some(l) => l,
            None => truncation_length(&dec, &bs, &ts, gamma, target, GapMode::General)?,
        })
    };
    let regime = match a.regime {
        RegimeArg::Auto => None,
        RegimeArg::Hoeffding => Some(Regime::Hoeffding),
        RegimeArg::Variance => Some(Regime::Variance),
        RegimeArg::Average => Some(Regime::Average),
        RegimeArg::RelativeRcddz => Some(Regime::RelativeRcddz),
        RegimeArg::RelativeAverage => Some(Regime::RelativeAverage),
    };
    let relative = match a.method {
        SolveMethod::WalkRelative => true,
        SolveMethod::Bidirectional => regime.is_some_and(Regime::is_relative),
        _ => false,
    };
    let mut params = SolverParams::new(gamma, eps, 1);
    params.samples = a.samples;
    params.dinv_b_bound = a.dinv_b_bound;
    params.repeats = a.trials.repeats;
    params.eta = a.eta;
    let mut report = match a.method {
        SolveMethod::Walk => {
            params.length = length_for(eps * bs.dinv_inf)?;
            with_trials(a.trials.trials, seed, truth, false, |s| {
                walker::estimate_abs(&dec, &b, &t, &params.clone().with_seed(s))
            })?
        }
        SolveMethod::WalkInfRelative => {
            params.length = length_for(0.5 * eps * bs.dinv_inf)?;
            with_trials(a.trials.trials, seed, truth, false, |s| {
                walker::estimate_inf_relative(&dec, &b, &t, &params.clone().with_seed(s))
            })?
        }
        SolveMethod::WalkRelative => {
            // all series terms are nonnegative here, so the first one bounds t^T x* below
            let first_term: f64 = 0.5 * t.iter().map(|(k, v)| v * b.get(k) / dec.diag(k)).sum::<f64>();
            let eta = a.eta.unwrap_or(first_term);
            if eta.is_nan() || eta <= 0.0 {
                bail!("cannot bound t^T x* away from zero; supply --eta");
            }
            params.length = length_for(0.5 * eps * eta)?;
            with_trials(a.trials.trials, seed, truth, true, |s| {
                walker::estimate_relative(&dec, &b, &t, &params.clone().with_seed(s))
            })?
        }
        SolveMethod::Push => {
            let len = length_for(eps)?;
            let r_max = a.r_max.unwrap_or(eps / (ts.l1 * (len * len) as f64));
            with_trials(0, seed, truth, false, |_| push::push_solve(&dec, &b, &t, len, r_max))?
        }
        SolveMethod::PushRcdd => {
            with_trials(0, seed, truth, false, |_| push::deterministic_solve_rcdd(&dec, &b, &t, gamma, eps))?
        }
        SolveMethod::Bidirectional => {
            let mut req = PlanRequest::new(gamma, eps);
            req.eta = a.eta;
            req.length = a.length;
            let mut plan = match regime {
                Some(r) => bidirectional::plan(&dec, &bs, &ts, &req, r)?,
                None => bidirectional::plan_auto(&dec, &bs, &ts, &req)?,
            };
            if let Some(r) = a.r_max {
                plan.r_max = r;
            }
            if let Some(n_s) = a.samples {
                plan.n_s = n_s;
            }
            let repeats = a.trials.repeats;
            let mut report = with_trials(a.trials.trials, seed, truth, relative, |s| {
                bidirectional::estimate(&dec, &b, &t, &plan, s, repeats)
            })?;
            report.note("regime", plan.regime.name()).note("rationale", plan.rationale.clone());
            report
        }
    };
    report.note("gamma_source", gamma_source).note("class", classify(&m).labels().join(","));
    if a.transpose {
        report.note("transposed", "true");
    }
    Ok(Outcome::ok(report))
}

fn pagerank_cmd(a: &PageRankArgs, seed: u64) -> anyhow::Result<Outcome> {
    let g = load_graph(&a.graph)?;
    let mode = match a.mode {
        ModeArg::EulerianRelative => PageRankMode::EulerianRelative,
        ModeArg::BoundedIndegree => PageRankMode::BoundedIndegree,
        ModeArg::GenericPpr => PageRankMode::GenericPpr,
    };
    let query = PageRankQuery { alpha: a.alpha, target: a.target, epsilon: a.epsilon, mode };
    let truth = if g.n() <= DENSE_CAP {
        let pi = pagerank::dense_pagerank(&g, a.alpha)?;
        Some(*pi.get(a.target).with_context(|| format!("target {} is not a node", a.target))?)
    } else {
        None
    };
    let repeats = a.trials.repeats;
    let report = with_trials(a.trials.trials, seed, truth, true, |s| {
        pagerank::pagerank_estimate(&g, &query, a.gamma, s, repeats)
    })?;
    Ok(Outcome::ok(report))
}

fn effres(a: &EffresArgs, seed: u64) -> anyhow::Result<Outcome> {
    let g = load_graph(&a.graph)?;
    let method = match a.method {
        EffresMethod::Walk => ResistanceMethod::Walk,
        EffresMethod::Push => ResistanceMethod::Push,
        EffresMethod::BidiHoeffding => ResistanceMethod::BidiHoeffding,
        EffresMethod::BidiVariance => ResistanceMethod::BidiVariance,
        EffresMethod::Auto => ResistanceMethod::Auto,
    };
    let (dec, _) = resistance::resistance_system(&g, a.s, a.t)?;
    let dense = g.n() <= DENSE_CAP;
    let spectral = if dense { Some(oracle::spectral_gap_sdd(&dec)?) } else { None };
    let gamma = match (a.gamma, spectral) {
        (Some(g), _) => g,
        (None, Some(s)) => s,
        (None, None) => bail!("--gamma is required above n = {DENSE_CAP}"),
    };
    let truth = if dense { Some(resistance::dense_resistance(&g, a.s, a.t)?) } else { None };
    let mut report = with_trials(a.trials.trials, seed, truth, a.relative, |s| {
        resistance::effective_resistance(&g, a.s, a.t, gamma, a.epsilon, method, a.relative, s)
    })?;
    if let Some(s) = spectral {
        report.detail("spectral_gap", s);
        if gamma > s * (1.0 + 1e-12) {
            eprintln!("warning: --gamma {gamma} exceeds the spectral gap {s}; the guarantee does not apply");
            report.note("gamma_warning", format!("supplied gamma exceeds the spectral gap {s}"));
        }
    }
    Ok(Outcome::ok(report))
}

fn gap(a: &GapArgs) -> anyhow::Result<Outcome> {
    let m = load_matrix(&a.matrix)?;
    let dec = decompose(&m)?;
    let mut report = Report::new("gap", 0);
    let mut best: Option<(PNorm, f64)> = None;
    for p in PNorm::ALL {
        let g = oracle::p_norm_gap(&dec, p)?;
        let key = format!("gamma_{}", p.label());
        report
            .detail(&key, g.value)
            .detail(&format!("{key}_lower"), g.lower)
            .detail(&format!("{key}_upper"), g.upper)
            .note(&key, if g.exact { "exact" } else { "interval" });
        if best.is_none_or(|(_, v)| g.value > v) {
            best = Some((p, g.value));
        }
    }
    let (p, v) = best.expect("three norms");
    report.estimate = v;
    report.note("max_p", p.label()).note("class", classify(&m).labels().join(","));
    if dec.class().sdd() {
        report.detail("spectral_gap", oracle::spectral_gap_sdd(&dec)?);
    }
    Ok(Outcome::ok(report))
}

const FIXTURE_MATRICES: [(&str, &str); 3] = [
    ("ppr2cycle.mtx", include_str!("../fixtures/ppr2cycle.mtx")),
    ("I.mtx", include_str!("../fixtures/I.mtx")),
    ("lap_edge.mtx", include_str!("../fixtures/lap_edge.mtx")),
];

const FIXTURE_GRAPHS: [(&str, &str); 3] = [
    ("path4.txt", include_str!("../fixtures/path4.txt")),
    ("k4.txt", include_str!("../fixtures/k4.txt")),
    ("euler3.txt", include_str!("../fixtures/euler3.txt")),
];

struct Audit {
    report: Report,
    failures: u64,
}

impl Audit {
    fn check(&mut self, name: &str, value: f64, pass: bool) {
        self.report.detail(name, value).note(name, if pass { "pass" } else { "fail" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn audit_matrix(au: &mut Audit, name: &str, m: &SparseSystem, length: usize, r_max: f64) -> anyhow::Result<()> {
    let dec = decompose(m)?;
    let n = m.dim();
    let ones = vec![1.0; n];
    let b = SparseVector::from_dense(&m.mul_vec(&ones)?)?;
    // the SDD path cross-checks against the pseudoinverse internally
    let solved = oracle::exact_solution(&dec, &b.to_dense(), 1e-12);
    let residual = match &solved {
        Ok(x) => {
            let mx = m.mul_vec(x)?;
            mx.iter().zip(b.to_dense()).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) / dec.d_max()
        }
        Err(_) => f64::MAX,
    };
    au.check(&format!("{name}.solution_residual"), residual, residual <= 1e-8);

    let mut defect = 0.0f64;
    let state = push::push_run_with(&dec, &b, length, r_max, push::PushOrder::Ascending, |s| {
        defect = defect.max(push::verify_invariant(s, &dec, &b).unwrap_or(f64::MAX));
    })?;
    au.check(&format!("{name}.push_invariant_defect"), defect, defect <= 1e-10);
    let ineq = push::verify_invariant_inequality(&state, &dec, &b)?;
    au.check(&format!("{name}.push_inequality"), ineq as u8 as f64, ineq);
    let cert = push::push_cost_certificate(&state, &dec, &b)?;
    au.check(&format!("{name}.push_cost"), state.work_units as f64, push::certificate_holds(&state, cert, &b));

    let exact = push::push_run(&dec, &b, length, 0.0)?;
    let xl = oracle::truncated_solution(&dec, &b.to_dense(), length)?;
    let mut gap = 0.0f64;
    for (k, want) in xl.iter().enumerate() {
        gap = gap.max((push::push_estimate(&exact, &SparseVector::unit(n, k, 1.0)?)? - want).abs());
    }
    au.check(&format!("{name}.push_exact"), gap, gap <= 1e-12 * (1.0 + xl.iter().fold(0.0f64, |a, x| a.max(x.abs()))));

    let g = oracle::gap_max(&dec)?;
    if g.value > 0.0 {
        if let Ok(x) = &solved {
            let t = SparseVector::unit(n, 0, 1.0)?;
            let eps = 1e-2;
            let len = truncation_length(
                &dec,
                &VecStats::of(&dec, &b),
                &VecStats::of(&dec, &t),
                g.value,
                eps,
                GapMode::General,
            )?;
            let xl = oracle::truncated_solution(&dec, &b.to_dense(), len)?;
            let err = (xl[0] - x[0]).abs();
            au.check(&format!("{name}.truncation"), err, err <= eps / 2.0);
        }
    }
    Ok(())
}

fn audit_graph(au: &mut Audit, name: &str, g: &Graph, length: usize, r_max: f64) -> anyhow::Result<()> {
    let n = g.n();
    if g.out_degrees().iter().all(|&d| d > 0.0) {
        let alpha = 0.2;
        let pi = pagerank::dense_pagerank(g, alpha)?;
        let mut worst_lower = f64::NEG_INFINITY;
        let mut worst_upper = f64::NEG_INFINITY;
        for (t, &p) in pi.iter().enumerate() {
            for (_, lb) in pagerank::pagerank_lower_bounds(g, t, alpha)? {
                worst_lower = worst_lower.max(lb - p);
            }
            if g.is_eulerian() {
                worst_upper = worst_upper.max(p - pagerank::pagerank_upper_bound_eulerian(g, t)?);
            }
        }
        au.check(&format!("{name}.pagerank_lower_bounds"), worst_lower, worst_lower <= 1e-12);
        if g.is_eulerian() {
            au.check(&format!("{name}.pagerank_upper_bound"), worst_upper, worst_upper <= 1e-12);
        }

        let mut fp_gap = 0.0f64;
        let mut bp_gap = 0.0f64;
        let mut dual_gap = 0.0f64;
        for v in 0..n {
            let fp = graphs::forward_push(g, v, alpha, length, r_max)?;
            let dec = graphs::build_ppr_system(g, alpha, Form::Degree)?;
            let p = push::push_run(&dec, &SparseVector::unit(n, v, alpha)?, length, r_max)?;
            fp_gap = fp_gap.max(graphs::push_state_gap(&p, &fp, |u| g.d_out(u)));
            let bp = graphs::backward_push(g, v, alpha, length, r_max)?;
            let (cdec, cb) = graphs::build_contribution_system(g, alpha, v, Form::Identity)?;
            let p = push::push_run(&cdec, &cb, length, r_max)?;
            bp_gap = bp_gap.max(graphs::push_state_gap(&p, &bp, |_| 1.0));
            if g.is_eulerian() {
                let dv = g.d_out(v);
                let bpt = graphs::backward_push(&g.transpose(), v, alpha, length, r_max * dv)?;
                dual_gap = dual_gap.max(graphs::push_state_gap(&bpt, &fp, |u| g.d_out(u) / dv));
            }
        }
        au.check(&format!("{name}.forward_push_equivalence"), fp_gap, fp_gap <= 1e-12);
        au.check(&format!("{name}.backward_push_equivalence"), bp_gap, bp_gap <= 1e-12);
        if g.is_eulerian() {
            au.check(&format!("{name}.eulerian_duality"), dual_gap, dual_gap <= 1e-12);
        }
    }
    if g.is_undirected() && n >= 2 && g.is_weakly_connected() {
        let r = resistance::dense_resistance(g, 0, n - 1)?;
        let (dec, v) = resistance::resistance_system(g, 0, n - 1)?;
        let x = oracle::exact_solution(&dec, &v.to_dense(), 1e-12)?;
        let via_series = v.dot_dense(&x);
        let d = (r - via_series).abs();
        au.check(&format!("{name}.resistance_consistency"), d, d <= 1e-8 * (1.0 + r));
    }
    Ok(())
}

fn audit(a: &AuditArgs) -> anyhow::Result<Outcome> {
    let mut au = Audit { report: Report::new("audit", 0), failures: 0 };
    let mut matrices: Vec<(String, String)> =
        FIXTURE_MATRICES.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
    let mut graph_texts: Vec<(String, String)> =
        FIXTURE_GRAPHS.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
    if !a.matrix.is_empty() || !a.graph.is_empty() {
        matrices = a.matrix.iter().map(|p| Ok((p.display().to_string(), read(p)?))).collect::<anyhow::Result<_>>()?;
        graph_texts = a.graph.iter().map(|p| Ok((p.display().to_string(), read(p)?))).collect::<anyhow::Result<_>>()?;
    }
    for (name, text) in &matrices {
        let m = io::read_matrix_market(text).with_context(|| format!("parsing {name}"))?;
        audit_matrix(&mut au, name, &m, a.length, a.r_max)?;
    }
    for (name, text) in &graph_texts {
        let g = io::read_edge_list(text).with_context(|| format!("parsing {name}"))?;
        audit_graph(&mut au, name, &g, a.length, a.r_max)?;
    }
    let mut report = au.report;
    report.estimate = au.failures as f64;
    report.param("length", a.length as f64).param("r_max", a.r_max);
    let code = if au.failures == 0 { 0 } else { EXIT_AUDIT };
    Ok(Outcome { report, code })
}

fn csv_row(r: &Report) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.estimate, r.error_target, r.cost.walk_steps, r.cost.push_work, r.cost.n_s, r.seed, r.elapsed_ms
    )
}

pub fn emit_report(r: &Report, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(r).expect("reports serialize") + "\n",
        Format::Csv => format!("{CSV_HEADER}\n{}\n", csv_row(r)),
        Format::Plain => {
            let mut s = format!("method: {}\nestimate: {}\nerror_target: {}\n", r.method, r.estimate, r.error_target);
            for (k, v) in &r.params {
                s += &format!("param {k}: {v}\n");
            }
            s += &format!(
                "walk_steps: {}\npush_work: {}\nn_s: {}\nseed: {}\nelapsed_ms: {:.3}\n",
                r.cost.walk_steps, r.cost.push_work, r.cost.n_s, r.seed, r.elapsed_ms
            );
            for (k, v) in &r.details {
                s += &format!("detail {k}: {v}\n");
            }
            for (k, v) in &r.notes {
                s += &format!("note {k}: {v}\n");
            }
            s
        }
    }
}

pub fn parse_report(json: &str) -> serde_json::Result<Report> {
    serde_json::from_str(json)
}
