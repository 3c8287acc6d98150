//! Command-line front end: `barrierfw gen|solve|compare|bounds|verify`.
//!
//! Exit codes: 0 on success, 2 on bad input or domain errors, 3 when an
//! invariant fails. Every output file is written to a temporary file in the
//! target directory and renamed into place, and each command that writes
//! files also writes a manifest JSON beside them.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::barrier::Barrier;
use crate::baselines::{em_solve, rsgm_backtracking_solve, rsgm_fixed_solve, PetObjective};
use crate::composite::{CompositeProblem, NonsmoothTerm};
use crate::dual_md::{solve_md_standalone, MdConfig};
use crate::error::Error;
use crate::fw_solver::{
    iteration_bounds_from, solve_fw, trace_csv_string, write_dual_trace_csv, Delta0Source,
    SolverConfig, StepRule, TraceRecord,
};
use crate::instances::rng::GENERATOR_VERSION;
use crate::instances::{gen_dopt, gen_log_invest, gen_pet, Instance};
use crate::linmap::LinearMap;
use crate::oracle::{reference_solve, REFERENCE_REL_GAP};
use crate::verify::{builtin_suite, verify_instance, SuiteOptions, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BARRIERFW_THREADS";

const DEFAULT_EPS: f64 = 1e-6;
const DEFAULT_MAX_ITERS: usize = 100_000;
const DEFAULT_BUDGET: usize = 500;
const REFERENCE_MAX_ITERS: usize = 2_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "barrierfw",
    version,
    about = "Frank-Wolfe for barrier-composite problems, with baselines and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded instance file.
    Gen(GenArgs),
    /// Run one method on an instance and write its trace.
    Solve(SolveArgs),
    /// Run several methods at the same iteration budget.
    Compare(CompareArgs),
    /// Print the iteration bounds for an instance and start.
    Bounds(BoundsArgs),
    /// Run the invariant suite on an instance or on the builtin set.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pet,
    Dopt,
    Loginvest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FwAdapt,
    FwExact,
    RsgmFixed,
    RsgmLs,
    Em,
    Md,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FwAdapt => "fw-adapt",
            Method::FwExact => "fw-exact",
            Method::RsgmFixed => "rsgm-fixed",
            Method::RsgmLs => "rsgm-ls",
            Method::Em => "em",
            Method::Md => "md",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    /// Near the boundary (PET only).
    Bd,
    /// Center of the domain.
    Ct,
    /// Read from `--x0`.
    Custom,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long = "type", value_enum)]
    pub family: Family,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    /// D-optimal design only: add a knapsack constraint.
    #[arg(long)]
    pub knapsack: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with defaults for any option of this command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub start: Option<Start>,
    /// JSON array with the custom start.
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Write 0 in the elapsed_ms column so traces are reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Print a fixed-width summary table.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Gap tolerance; baselines run for the full iteration budget.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub trace_out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<Method>,
    /// Iterations per method.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub start: Option<Start>,
    #[arg(long)]
    pub x0: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Use the initial FW gap in place of a measured `δ₀`.
    #[arg(long)]
    pub surrogate: bool,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Instance file; the builtin set is used when omitted.
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Options that may come from `--config`. Flags win over the file, and the
/// file wins over the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub method: Option<Method>,
    pub methods: Option<Vec<Method>>,
    pub start: Option<Start>,
    pub x0: Option<PathBuf>,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub budget: Option<usize>,
    pub no_timing: Option<bool>,
    pub summary: Option<bool>,
    pub surrogate: Option<bool>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Invariant(String),
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Hypothesis { .. } | Error::Numerical(_) => Failure::Invariant(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a, &argv),
        Command::Solve(a) => cmd_solve(a, &argv),
        Command::Compare(a) => cmd_compare(a, &argv),
        Command::Bounds(a) => cmd_bounds(a, &argv),
        Command::Verify(a) => cmd_verify(a, &argv),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant failure: {msg}");
            EXIT_INVARIANT
        }
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[derive(Debug, Serialize)]
struct InstanceInfo {
    path: PathBuf,
    kind: &'static str,
    seed: u64,
}

impl InstanceInfo {
    fn new(path: &Path, inst: &Instance) -> Self {
        let seed = match inst {
            Instance::Pet(p) => p.seed,
            Instance::Dopt(d) => d.seed,
            Instance::LogInvest(l) => l.seed,
        };
        Self {
            path: path.to_path_buf(),
            kind: inst.kind(),
            seed,
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    argv: &'a [String],
    config: C,
    crate_version: &'static str,
    generator_version: &'static str,
    instance: Option<InstanceInfo>,
    outputs: Vec<PathBuf>,
}

fn write_manifest<C: Serialize>(
    at: &Path,
    command: &str,
    argv: &[String],
    config: C,
    instance: Option<InstanceInfo>,
    outputs: Vec<PathBuf>,
) -> Result<(), Failure> {
    let m = Manifest {
        command,
        argv,
        config,
        crate_version: env!("CARGO_PKG_VERSION"),
        generator_version: GENERATOR_VERSION,
        instance,
        outputs,
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| invalid(e.to_string()))?;
    write_atomic(at, text.as_bytes())?;
    Ok(())
}

fn cmd_gen(a: GenArgs, argv: &[String]) -> Result<(), Failure> {
    if a.knapsack && a.family != Family::Dopt {
        return Err(invalid("--knapsack applies to dopt instances only"));
    }
    let inst = match a.family {
        Family::Pet => Instance::Pet(gen_pet(a.n, a.m, a.seed)?),
        Family::Dopt => Instance::Dopt(gen_dopt(a.n, a.m, a.seed, a.knapsack)?),
        Family::Loginvest => Instance::LogInvest(gen_log_invest(a.n, a.m, a.seed)?),
    };
    write_atomic(&a.out, inst.to_json()?.as_bytes())?;
    #[derive(Serialize)]
    struct GenConfig {
        family: Family,
        n: usize,
        m: usize,
        seed: u64,
        knapsack: bool,
    }
    let cfg = GenConfig {
        family: a.family,
        n: a.n,
        m: a.m,
        seed: a.seed,
        knapsack: a.knapsack,
    };
    let info = InstanceInfo::new(&a.out, &inst);
    write_manifest(
        &manifest_path(&a.out),
        "gen",
        argv,
        cfg,
        Some(info),
        vec![a.out.clone()],
    )
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::load(path).map_err(|e| invalid(format!("loading {}: {e}", path.display())))
}

fn load_x0(path: Option<&Path>, dim: usize) -> Result<DVector<f64>, Failure> {
    let path = path.ok_or_else(|| invalid("--start custom needs --x0"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("reading {}: {e}", path.display())))?;
    let v: Vec<f64> =
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if v.len() != dim {
        return Err(Failure::from(Error::Dimension {
            expected: dim,
            got: v.len(),
        }));
    }
    Ok(DVector::from_vec(v))
}

fn start_point(inst: &Instance, start: Start, x0: Option<&Path>) -> Result<DVector<f64>, Failure> {
    match (inst, start) {
        (Instance::Pet(p), Start::Bd) => Ok(p.start_boundary()?),
        (Instance::Pet(p), Start::Ct) => Ok(p.start_center()),
        (Instance::Pet(p), Start::Custom) => load_x0(x0, p.voxels()),
        (Instance::Dopt(d), Start::Ct) if d.knapsack.is_some() => Ok(d.start_knapsack()?),
        (Instance::Dopt(d), Start::Ct) => Ok(d.start_center()),
        (Instance::Dopt(d), Start::Custom) => load_x0(x0, d.num_points()),
        (Instance::LogInvest(l), Start::Ct) => Ok(l.start_center()),
        (Instance::LogInvest(l), Start::Custom) => load_x0(x0, l.returns.ncols()),
        (_, Start::Bd) => Err(invalid(
            "the boundary start is defined for PET instances only",
        )),
    }
}

/// One finished method run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub method: Method,
    pub iterations: usize,
    /// `F` of the last iterate, or the dual objective for mirror descent.
    pub final_objective: f64,
    pub final_gap: f64,
    pub wall_ms: f64,
    #[serde(skip)]
    pub csv: String,
}

fn primal_summary(method: Method, trace: &[TraceRecord], wall_ms: f64) -> RunSummary {
    let last = trace.last().expect("traces are never empty");
    RunSummary {
        method,
        iterations: trace.len() - 1,
        final_objective: last.objective,
        final_gap: last.gap,
        wall_ms,
        csv: trace_csv_string(trace),
    }
}

fn run_fw<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    x0: &DVector<f64>,
    method: Method,
    eps: Option<f64>,
    max_iters: usize,
    timing: bool,
) -> Result<(Vec<TraceRecord>, f64), Failure>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    let rule = if method == Method::FwAdapt {
        StepRule::Adaptive
    } else {
        StepRule::ExactLineSearch
    };
    let mut cfg = SolverConfig::new(rule)
        .max_iters(max_iters)
        .record_timing(timing);
    if let Some(eps) = eps {
        cfg = cfg.gap_tol(eps);
    }
    let t = Instant::now();
    let out = solve_fw(p, x0, &cfg)?;
    Ok((out.trace, t.elapsed().as_secs_f64() * 1e3))
}

fn run_md<M, H>(
    p: &CompositeProblem<crate::barrier::WeightedLogBarrier, M, H>,
    x0: &DVector<f64>,
    eps: Option<f64>,
    max_iters: usize,
    timing: bool,
) -> Result<RunSummary, Failure>
where
    M: LinearMap<Output = DVector<f64>>,
    H: NonsmoothTerm,
{
    let y0 = p.dual_point(x0)?;
    let cfg = MdConfig {
        gap_tol: eps,
        max_iters: Some(max_iters),
        record_timing: timing,
        keep_iterates: false,
    };
    let t = Instant::now();
    let out = solve_md_standalone(p, &y0, x0, &cfg)?;
    let wall_ms = t.elapsed().as_secs_f64() * 1e3;
    let mut buf = Vec::new();
    write_dual_trace_csv(&mut buf, &out.trace)?;
    let last = out.trace.last().expect("traces are never empty");
    Ok(RunSummary {
        method: Method::Md,
        iterations: out.trace.len() - 1,
        final_objective: last.dual_value,
        final_gap: last.gap,
        wall_ms,
        csv: String::from_utf8(buf).expect("CSV output is ASCII"),
    })
}

fn run_method(
    inst: &Instance,
    method: Method,
    x0: &DVector<f64>,
    eps: Option<f64>,
    max_iters: usize,
    timing: bool,
) -> Result<RunSummary, Failure> {
    let (trace, wall) = match (method, inst) {
        (Method::FwAdapt | Method::FwExact, Instance::Pet(p)) => {
            run_fw(&p.problem()?, x0, method, eps, max_iters, timing)?
        }
        (Method::FwAdapt | Method::FwExact, Instance::Dopt(d)) if d.knapsack.is_some() => {
            run_fw(&d.knapsack_problem()?, x0, method, eps, max_iters, timing)?
        }
        (Method::FwAdapt | Method::FwExact, Instance::Dopt(d)) => {
            run_fw(&d.problem()?, x0, method, eps, max_iters, timing)?
        }
        (Method::FwAdapt | Method::FwExact, Instance::LogInvest(l)) => {
            run_fw(&l.problem()?, x0, method, eps, max_iters, timing)?
        }
        (Method::Md, Instance::Pet(p)) => return run_md(&p.problem()?, x0, eps, max_iters, timing),
        (Method::Md, Instance::LogInvest(l)) => {
            return run_md(&l.problem()?, x0, eps, max_iters, timing)
        }
        (Method::RsgmFixed | Method::RsgmLs | Method::Em, Instance::Pet(p)) => {
            let obj = PetObjective::from_instance(p)?;
            let t = Instant::now();
            let out = match method {
                Method::RsgmFixed => rsgm_fixed_solve(&obj, x0, max_iters, timing)?,
                Method::RsgmLs => rsgm_backtracking_solve(&obj, x0, max_iters, timing)?,
                _ => em_solve(&obj, x0, max_iters, timing)?,
            };
            (out.trace, t.elapsed().as_secs_f64() * 1e3)
        }
        (m, i) => {
            return Err(invalid(format!(
                "method {} does not apply to {} instances",
                m.name(),
                i.kind()
            )))
        }
    };
    Ok(primal_summary(
        method,
        &trace,
        if timing { wall } else { 0.0 },
    ))
}

fn summary_table(rows: &[RunSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>24} {:>24} {:>12}",
        "method", "iters", "objective", "gap", "wall_ms"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>24.16e} {:>24.16e} {:>12.3}",
            r.method.name(),
            r.iterations,
            r.final_objective,
            r.final_gap,
            r.wall_ms
        );
    }
    s
}

fn check_eps(eps: f64) -> Result<f64, Failure> {
    if eps > 0.0 && eps.is_finite() {
        Ok(eps)
    } else {
        Err(invalid(format!("eps = {eps} must be positive")))
    }
}

#[derive(Debug, Serialize)]
struct SolveConfig {
    method: Method,
    start: Start,
    x0: Option<PathBuf>,
    eps: f64,
    max_iters: usize,
    no_timing: bool,
}

fn cmd_solve(a: SolveArgs, argv: &[String]) -> Result<(), Failure> {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let cfg = SolveConfig {
        method: a.method.or(file.method).unwrap_or(Method::FwAdapt),
        start: a.common.start.or(file.start).unwrap_or(Start::Ct),
        x0: a.common.x0.clone().or(file.x0),
        eps: check_eps(a.eps.or(file.eps).unwrap_or(DEFAULT_EPS))?,
        max_iters: a.max_iters.or(file.max_iters).unwrap_or(DEFAULT_MAX_ITERS),
        no_timing: a.common.no_timing || file.no_timing.unwrap_or(false),
    };
    let summary = a.common.summary || file.summary.unwrap_or(false);
    let inst = load_instance(&a.instance)?;
    let x0 = start_point(&inst, cfg.start, cfg.x0.as_deref())?;
    let run = run_method(
        &inst,
        cfg.method,
        &x0,
        Some(cfg.eps),
        cfg.max_iters,
        !cfg.no_timing,
    )?;
    write_atomic(&a.trace_out, run.csv.as_bytes())?;
    if summary {
        print!("{}", summary_table(std::slice::from_ref(&run)));
    }
    let info = InstanceInfo::new(&a.instance, &inst);
    write_manifest(
        &manifest_path(&a.trace_out),
        "solve",
        argv,
        cfg,
        Some(info),
        vec![a.trace_out.clone()],
    )
}

/// Worker count: `BARRIERFW_THREADS` if set, else the available
/// parallelism, never more than `jobs`.
pub fn thread_cap(jobs: usize) -> Result<usize, String> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(format!(
                    "{THREADS_ENV} must be a positive integer (got {v:?})"
                ))
            }
        },
        Err(_) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };
    Ok(cap.min(jobs).max(1))
}

fn default_methods(inst: &Instance) -> Vec<Method> {
    match inst {
        Instance::Pet(_) => vec![
            Method::FwAdapt,
            Method::FwExact,
            Method::RsgmFixed,
            Method::RsgmLs,
            Method::Em,
        ],
        Instance::Dopt(_) => vec![Method::FwAdapt, Method::FwExact],
        Instance::LogInvest(_) => vec![Method::FwAdapt, Method::FwExact, Method::Md],
    }
}

#[derive(Debug, Serialize)]
struct CompareConfig {
    methods: Vec<Method>,
    start: Start,
    x0: Option<PathBuf>,
    budget: usize,
    no_timing: bool,
    threads: usize,
}

#[derive(Debug, Serialize)]
struct CompareSummary<'a> {
    instance: &'a Path,
    start: Start,
    budget: usize,
    methods: Vec<RankedRun<'a>>,
}

#[derive(Debug, Serialize)]
struct RankedRun<'a> {
    #[serde(flatten)]
    run: &'a RunSummary,
    /// Position when ordered by final objective, 1 for the best. Mirror
    /// descent reports a dual value and is not ranked.
    rank: Option<usize>,
}

fn cmd_compare(a: CompareArgs, argv: &[String]) -> Result<(), Failure> {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let inst = load_instance(&a.instance)?;
    let methods = if !a.methods.is_empty() {
        a.methods.clone()
    } else {
        file.methods
            .clone()
            .unwrap_or_else(|| default_methods(&inst))
    };
    let mut seen = Vec::new();
    for m in &methods {
        if seen.contains(m) {
            return Err(invalid(format!("method {} listed twice", m.name())));
        }
        seen.push(*m);
    }
    let cfg = CompareConfig {
        threads: thread_cap(methods.len()).map_err(Failure::Invalid)?,
        methods,
        start: a.common.start.or(file.start).unwrap_or(Start::Bd),
        x0: a.common.x0.clone().or(file.x0),
        budget: a.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET),
        no_timing: a.common.no_timing || file.no_timing.unwrap_or(false),
    };
    let summary = a.common.summary || file.summary.unwrap_or(false);
    let x0 = start_point(&inst, cfg.start, cfg.x0.as_deref())?;
    std::fs::create_dir_all(&a.out_dir)?;

    let mut results: Vec<Option<Result<RunSummary, Failure>>> =
        (0..cfg.methods.len()).map(|_| None).collect();
    for (chunk_idx, chunk) in cfg.methods.chunks(cfg.threads).enumerate() {
        let outs: Vec<Result<RunSummary, Failure>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&m| {
                    let (inst, x0) = (&inst, &x0);
                    s.spawn(move || run_method(inst, m, x0, None, cfg.budget, !cfg.no_timing))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        });
        for (j, r) in outs.into_iter().enumerate() {
            results[chunk_idx * cfg.threads + j] = Some(r);
        }
    }
    let runs: Vec<RunSummary> = results
        .into_iter()
        .map(|r| r.expect("every method ran"))
        .collect::<Result<_, _>>()?;

    let mut outputs = Vec::new();
    for r in &runs {
        let path = a.out_dir.join(format!("{}.csv", r.method.name()));
        write_atomic(&path, r.csv.as_bytes())?;
        outputs.push(path);
    }
    let mut order: Vec<usize> = (0..runs.len())
        .filter(|&i| runs[i].method != Method::Md)
        .collect();
    order.sort_by(|&i, &j| runs[i].final_objective.total_cmp(&runs[j].final_objective));
    let ranked = runs
        .iter()
        .enumerate()
        .map(|(i, run)| RankedRun {
            run,
            rank: order.iter().position(|&o| o == i).map(|p| p + 1),
        })
        .collect();
    let doc = CompareSummary {
        instance: &a.instance,
        start: cfg.start,
        budget: cfg.budget,
        methods: ranked,
    };
    let summary_path = a.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&doc).map_err(|e| invalid(e.to_string()))?;
    write_atomic(&summary_path, text.as_bytes())?;
    outputs.push(summary_path);
    if summary {
        print!("{}", summary_table(&runs));
    }
    let info = InstanceInfo::new(&a.instance, &inst);
    write_manifest(
        &a.out_dir.join("manifest.json"),
        "compare",
        argv,
        cfg,
        Some(info),
        outputs,
    )
}

fn measured_bounds<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    x0: &DVector<f64>,
    eps: f64,
    surrogate: bool,
) -> Result<crate::fw_solver::BoundReport, Failure>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    p.check_start(x0)?;
    let (delta0, source) = if surrogate {
        let v = p.lmo_at(x0)?;
        (p.fw_gap(x0, &v.point)?, Delta0Source::GapSurrogate)
    } else {
        let r = reference_solve(p, x0, REFERENCE_REL_GAP, REFERENCE_MAX_ITERS)?;
        (p.value(x0)? - r.value, Delta0Source::Measured)
    };
    if !(delta0 > 0.0) {
        return Err(invalid(format!(
            "the start is optimal to reference accuracy (delta0 = {delta0})"
        )));
    }
    Ok(iteration_bounds_from(
        delta0,
        source,
        p.theta(),
        p.variation_bound(),
        eps,
    )?)
}

#[derive(Debug, Serialize)]
struct BoundsConfig {
    start: Start,
    x0: Option<PathBuf>,
    eps: f64,
    surrogate: bool,
}

fn cmd_bounds(a: BoundsArgs, argv: &[String]) -> Result<(), Failure> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let cfg = BoundsConfig {
        start: a.start.or(file.start).unwrap_or(Start::Ct),
        x0: a.x0.clone().or(file.x0),
        eps: check_eps(a.eps.or(file.eps).unwrap_or(1e-2))?,
        surrogate: a.surrogate || file.surrogate.unwrap_or(false),
    };
    let inst = load_instance(&a.instance)?;
    let x0 = start_point(&inst, cfg.start, cfg.x0.as_deref())?;
    let report = match &inst {
        Instance::Pet(p) => measured_bounds(&p.problem()?, &x0, cfg.eps, cfg.surrogate)?,
        Instance::Dopt(d) if d.knapsack.is_some() => {
            measured_bounds(&d.knapsack_problem()?, &x0, cfg.eps, cfg.surrogate)?
        }
        Instance::Dopt(d) => measured_bounds(&d.problem()?, &x0, cfg.eps, cfg.surrogate)?,
        Instance::LogInvest(l) => measured_bounds(&l.problem()?, &x0, cfg.eps, cfg.surrogate)?,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| invalid(e.to_string()))?;
    println!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
        let info = InstanceInfo::new(&a.instance, &inst);
        write_manifest(
            &manifest_path(out),
            "bounds",
            argv,
            cfg,
            Some(info),
            vec![out.clone()],
        )?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs, argv: &[String]) -> Result<(), Failure> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let defaults = SuiteOptions::default();
    let opts = SuiteOptions {
        eps: check_eps(a.eps.or(file.eps).unwrap_or(defaults.eps))?,
        max_iters: a.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
        ..defaults
    };
    let (report, info): (VerifyReport, Option<InstanceInfo>) = match &a.instance {
        Some(path) => {
            let inst = load_instance(path)?;
            (
                verify_instance(&inst, &opts)?,
                Some(InstanceInfo::new(path, &inst)),
            )
        }
        None => (builtin_suite(&opts)?, None),
    };
    print!("{report}");
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| invalid(e.to_string()))?;
        write_atomic(out, text.as_bytes())?;
        write_manifest(
            &manifest_path(out),
            "verify",
            argv,
            opts,
            info,
            vec![out.clone()],
        )?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::Invariant(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_the_output() {
        assert_eq!(
            manifest_path(Path::new("out/trace.csv")),
            PathBuf::from("out/trace.csv.manifest.json")
        );
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"eps": 0.1, "colour": 1}"#).is_err());
        let c: ConfigFile =
            serde_json::from_str(r#"{"method": "rsgm-ls", "start": "bd"}"#).unwrap();
        assert_eq!((c.method, c.start), (Some(Method::RsgmLs), Some(Start::Bd)));
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(["barrierfw", "solve"]), EXIT_INVALID);
        assert_eq!(
            run([
                "barrierfw",
                "gen",
                "--type",
                "pet",
                "--n",
                "5",
                "--m",
                "5",
                "--seed",
                "1",
                "--out",
                "/nonexistent/x.json"
            ]),
            EXIT_INVALID
        );
    }
}
