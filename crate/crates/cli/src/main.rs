use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tracescreen::admm::{self, AdmmConfig, GeneralizedInstance, Penalty};
use tracescreen::harness::{
    bench, load_problem, prepare, report, save_problem, BenchConfig, BenchRecord, DataSpec, Format, GaussianSpec,
    Prepared, Shape, ShapeSpec,
};
use tracescreen::model::TraceRegressionProblem;
use tracescreen::path::{
    full_path, path_gaps, screened_path, FirstPoint, LambdaSchedule, PathOptions, PathResult, DEFAULT_RATIO,
    SAFETY_OBJECTIVE_TOL,
};
use tracescreen::Error;

const EXIT_CONVERGENCE: u8 = 2;
const EXIT_SAFETY: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "tracescreen", version, about = "Adaptive nuclear-norm trace regression with subspace screening")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic problem and write manifest.json, y.csv, X.csv
    Generate {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve at a single λ
    Solve {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Absolute λ; overrides --lambda-ratio
        #[arg(long)]
        lambda: Option<f64>,
        /// λ as a fraction of λ_max
        #[arg(long, default_value_t = 0.5)]
        lambda_ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solution path over a geometric λ grid
    Path {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        grid: PathArgs,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Include each solution matrix in the records
        #[arg(long)]
        with_solutions: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time full against screened paths over one or more sample sizes
    Bench {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        grid: PathArgs,
        /// Comma-separated sample sizes; defaults to --n
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-λ screening counts along the screened path
    ScreenStats {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        grid: PathArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render bench JSON as json, csv or markdown
    Report {
        /// Bench JSON file
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Load a problem from a manifest instead of generating one
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    p: usize,
    #[arg(long, default_value_t = 45)]
    q: usize,
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Rank of the Gaussian truth
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Use a shape image as the truth (sets p = q = --size)
    #[arg(long)]
    shape: Option<String>,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Fixed ADMM penalty; by default σ = λ/rms(y)
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1.618)]
    tau: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
}

#[derive(Args, Debug, Clone)]
struct PathArgs {
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    ratio: f64,
    /// Largest grid value as a multiple of λ_max
    #[arg(long, default_value_t = 1.0)]
    lambda_max_ratio: f64,
    #[arg(long)]
    warm_start: bool,
    #[arg(long, value_enum, default_value_t = First::Solve)]
    first_point: First,
    /// Absolute zero tolerance for the screening test
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full,
    Screened,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum First {
    Solve,
    Interpolant,
}

impl DataArgs {
    fn spec(&self) -> anyhow::Result<DataSpec> {
        Ok(match &self.shape {
            Some(s) => {
                let shape: Shape = s.parse()?;
                DataSpec::Shape(ShapeSpec { shape, size: self.size, n: self.n, noise_std: self.noise, seed: self.seed })
            }
            None => DataSpec::Gaussian(GaussianSpec {
                p: self.p,
                q: self.q,
                n: self.n,
                rank: self.rank,
                noise_std: self.noise,
                seed: self.seed,
            }),
        })
    }

    fn problem(&self) -> anyhow::Result<TraceRegressionProblem> {
        match &self.manifest {
            Some(m) => Ok(load_problem(m)?),
            None => Ok(self.spec()?.generate()?.0),
        }
    }
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<AdmmConfig> {
        let mut cfg = AdmmConfig { tau: self.tau, max_iter: self.max_iter, ..AdmmConfig::default() }.with_tol(self.tol);
        if let Some(s) = self.sigma {
            cfg.penalty = Penalty::Fixed(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl PathArgs {
    fn options(&self) -> PathOptions {
        PathOptions {
            warm_start: self.warm_start,
            epsilon: self.epsilon,
            first_point: match self.first_point {
                First::Solve => FirstPoint::Solve,
                First::Interpolant => FirstPoint::Interpolant,
            },
        }
    }

    fn schedule(&self, lambda_max: f64) -> anyhow::Result<LambdaSchedule> {
        if !(self.lambda_max_ratio > 0.0) {
            return Err(Error::InvalidArgument("--lambda-max-ratio must be positive".into()).into());
        }
        let mut s = LambdaSchedule::geometric(lambda_max * self.lambda_max_ratio, self.k, self.ratio)?;
        s.lambda_max = lambda_max;
        Ok(s)
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(m.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

fn path_records(res: &PathResult, with_solutions: bool) -> Vec<Value> {
    res.records
        .iter()
        .map(|r| {
            let mut v = json!({
                "lambda": r.lambda,
                "objective": r.objective,
                "rank": r.rank,
                "iters": r.iters,
                "converged": r.converged,
                "time_ms": r.solve_ms + r.screen_ms,
                "screened_rows": r.screened_rows,
                "screened_cols": r.screened_cols,
            });
            if with_solutions {
                v["b"] = matrix_rows(&r.b);
            }
            v
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn cmd_generate(data: &DataArgs, out: &Path) -> anyhow::Result<()> {
    let (problem, truth) = data.spec()?.generate()?;
    let manifest = save_problem(&problem, out)?;
    let truth_path = out.join("B_true.csv");
    let text: String = truth
        .row_iter()
        .map(|r| r.iter().map(|v| tracescreen::harness::io::fmt_f64(*v)).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(&truth_path, text).with_context(|| format!("writing {}", truth_path.display()))?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_solve(
    data: &DataArgs,
    solver: &SolverArgs,
    lambda: Option<f64>,
    ratio: f64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let problem = data.problem()?;
    let cfg = solver.config()?;
    let prep = prepare(&problem, solver.gamma)?;
    let lambda = lambda.unwrap_or(ratio * prep.lambda_max);
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")).into());
    }
    let inst = GeneralizedInstance::from_problem(&problem, &prep.weights, lambda)?;
    let sol = admm::solve(&inst, &cfg, None)?;
    let v = json!({
        "lambda": lambda,
        "lambda_max": prep.lambda_max,
        "objective": problem.objective(&prep.weights, &sol.b, lambda),
        "rank": sol.rank,
        "iters": sol.iters,
        "converged": sol.converged,
        "time_ms": sol.solve_time_ms,
        "b": matrix_rows(&sol.b),
    });
    emit(out, &to_json(&v))?;
    if !sol.converged {
        return Err(Exit(EXIT_CONVERGENCE, format!("ADMM did not converge in {} iterations", cfg.max_iter)).into());
    }
    Ok(())
}

struct PathRun {
    prep: Prepared,
    full: Vec<PathResult>,
    screened: Vec<PathResult>,
}

fn run_paths(
    problem: &TraceRegressionProblem,
    solver: &SolverArgs,
    grid: &PathArgs,
    mode: Mode,
    reps: usize,
) -> anyhow::Result<PathRun> {
    if reps == 0 {
        return Err(Error::InvalidArgument("--reps must be at least 1".into()).into());
    }
    let cfg = solver.config()?;
    let prep = prepare(problem, solver.gamma)?;
    let schedule = grid.schedule(prep.lambda_max)?;
    let opts = grid.options();
    let mut full = Vec::new();
    let mut screened = Vec::new();
    for _ in 0..reps {
        if mode != Mode::Screened {
            full.push(full_path(problem, &prep.weights, &schedule, &cfg, &opts)?);
        }
        if mode != Mode::Full {
            screened.push(screened_path(problem, &prep.weights, &prep.gram, &schedule, &cfg, &opts)?);
        }
    }
    Ok(PathRun { prep, full, screened })
}

fn cmd_path(
    data: &DataArgs,
    solver: &SolverArgs,
    grid: &PathArgs,
    mode: Mode,
    reps: usize,
    with_solutions: bool,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let problem = data.problem()?;
    let run = run_paths(&problem, solver, grid, mode, reps)?;
    let t_f: Vec<f64> = run.full.iter().map(|r| r.wall_ms).collect();
    let t_s: Vec<f64> = run.screened.iter().map(|r| r.wall_ms).collect();
    let (tf, ts) = ((!t_f.is_empty()).then(|| mean(&t_f)), (!t_s.is_empty()).then(|| mean(&t_s)));
    let speedup = match (tf, ts) {
        (Some(f), Some(s)) => Some(f / s),
        _ => None,
    };
    let mode_name = match mode {
        Mode::Full => "full",
        Mode::Screened => "screened",
        Mode::Both => "both",
    };
    let primary = run.screened.last().or(run.full.last()).expect("at least one path");
    let mut v = json!({
        "mode": mode_name,
        "lambda_max": run.prep.lambda_max,
        "records": path_records(primary, with_solutions),
        "totals": { "T_f_ms": tf, "T_s_ms": ts, "speedup": speedup },
    });
    let mut unsafe_gap = None;
    if let (Some(f), Some(s)) = (run.full.last(), run.screened.last()) {
        v["full_records"] = json!(path_records(f, with_solutions));
        let gaps = path_gaps(f, s);
        let og = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
        let sg = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
        v["safety"] = json!({ "max_objective_gap": og, "max_solution_gap": sg, "ok": og <= SAFETY_OBJECTIVE_TOL });
        if og > SAFETY_OBJECTIVE_TOL {
            unsafe_gap = Some(og);
        }
    }
    emit(out, &to_json(&v))?;
    if let Some(og) = unsafe_gap {
        return Err(Exit(EXIT_SAFETY, format!("screened path objective differs by {og:.3e} (relative)")).into());
    }
    if !run.full.iter().chain(&run.screened).all(|r| r.converged()) {
        return Err(Exit(EXIT_CONVERGENCE, "ADMM did not converge at every λ".into()).into());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    data: &DataArgs,
    solver: &SolverArgs,
    grid: &PathArgs,
    ns: &[usize],
    reps: usize,
    format: &str,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let format: Format = format.parse()?;
    let ns = if ns.is_empty() { vec![data.n] } else { ns.to_vec() };
    let specs = ns.iter().map(|&n| DataArgs { n, ..data.clone() }.spec()).collect::<anyhow::Result<Vec<DataSpec>>>()?;
    if !(grid.lambda_max_ratio == 1.0) {
        log::warn!("bench ignores --lambda-max-ratio; grids start at λ_max");
    }
    let cfg = BenchConfig {
        k: grid.k,
        ratio: grid.ratio,
        reps,
        gamma: solver.gamma,
        admm: solver.config()?,
        path: grid.options(),
    };
    let records = bench(&specs, &cfg)?;
    emit(out, &report(&records, format)?)?;
    if records.iter().any(|r| !r.safety_ok) {
        return Err(Exit(EXIT_SAFETY, "screened and full paths disagree".into()).into());
    }
    if records.iter().any(|r| !r.all_converged) {
        return Err(Exit(EXIT_CONVERGENCE, "ADMM did not converge on every path".into()).into());
    }
    Ok(())
}

fn cmd_screen_stats(data: &DataArgs, solver: &SolverArgs, grid: &PathArgs, out: Option<&Path>) -> anyhow::Result<()> {
    let problem = data.problem()?;
    let run = run_paths(&problem, solver, grid, Mode::Screened, 1)?;
    let res = run.screened.last().expect("one screened path");
    let rows: Vec<Value> = res
        .records
        .iter()
        .map(|r| {
            json!({
                "lambda": r.lambda,
                "screened_rows": r.screened_rows,
                "screened_cols": r.screened_cols,
                "kept_dims": [r.kept_dims.0, r.kept_dims.1],
            })
        })
        .collect();
    emit(out, &to_json(&json!(rows)))?;
    if !res.converged() {
        return Err(Exit(EXIT_CONVERGENCE, "ADMM did not converge at every λ".into()).into());
    }
    Ok(())
}

fn cmd_report(input: &Path, format: &str, out: Option<&Path>) -> anyhow::Result<()> {
    let format: Format = format.parse()?;
    let text = fs::read_to_string(input).map_err(|source| Error::Io { path: input.display().to_string(), source })?;
    let records: Vec<BenchRecord> = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { path: input.display().to_string(), msg: e.to_string() })?;
    emit(out, &report(&records, format)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.cmd {
        Cmd::Generate { data, out } => cmd_generate(data, out),
        Cmd::Solve { data, solver, lambda, lambda_ratio, out } => {
            cmd_solve(data, solver, *lambda, *lambda_ratio, out.as_deref())
        }
        Cmd::Path { data, solver, grid, mode, reps, with_solutions, out } => {
            cmd_path(data, solver, grid, *mode, *reps, *with_solutions, out.as_deref())
        }
        Cmd::Bench { data, solver, grid, ns, reps, format, out } => {
            cmd_bench(data, solver, grid, ns, *reps, format, out.as_deref())
        }
        Cmd::ScreenStats { data, solver, grid, out } => cmd_screen_stats(data, solver, grid, out.as_deref()),
        Cmd::Report { input, format, out } => cmd_report(input, format, out.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(Exit(code, _)) = err.downcast_ref::<Exit>() {
        return *code;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::SvdFailed { .. }) => 1,
        Some(_) => EXIT_INPUT,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_INPUT,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
