mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use lahoc::laguerre_basis::{build_rule, BasisConfig, BasisError, BasisRule};
use lahoc::ocp_model::problem_file::{read_problem, ProblemFileError};
use lahoc::ocp_model::{solve_problem, Builtin, ModelError, OCProblem, OcpSolution};
use lahoc::oracle_bvp::{compare, solve_truncated, Comparison, MeshLayout, OracleError, RunTrajectory, TruncationConfig};
use lahoc::sham_engine::{SolverConfig, SolverError, SystemSpec, Termination};
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "lahoc", version, about = "Infinite-horizon optimal control by Laguerre collocation and homotopy series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and write trajectories, convergence data and a summary.
    Run(RunArgs),
    /// Repeat the solve over a list of values of one parameter.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// Builtin problem (tp31 or tp32).
    #[arg(long)]
    builtin: Option<String>,
    /// Problem file in the lahoc-problem v1 format.
    #[arg(long)]
    problem: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Laguerre order N (N + 1 collocation nodes).
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Laguerre scaling factor.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Convergence-control parameter.
    #[arg(long, default_value_t = -0.6, allow_hyphen_values = true)]
    hbar: f64,
    /// Maximum number of homotopy orders.
    #[arg(long, default_value_t = 20)]
    orders: usize,
    /// Tail-norm tolerance for early termination.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Lipschitz constant of the nonlinearity, enables the gamma diagnostic.
    #[arg(long)]
    lipschitz: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct OracleArgs {
    /// Truncation horizon of the reference solver.
    #[arg(long, default_value_t = 40.0)]
    t_end: f64,
    /// Reference mesh size (default: graded spacing law).
    #[arg(long)]
    mesh: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Cross-check against the truncated-domain reference solver.
    #[arg(long)]
    compare: bool,
    /// Largest accepted deviation from the reference solver.
    #[arg(long, default_value_t = 1e-5)]
    compare_tol: f64,
    /// Explicit report times, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "log_times")]
    times: Option<Vec<f64>>,
    /// Number of log-spaced report times on [0.01, t_end].
    #[arg(long)]
    log_times: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "lahoc-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    solver: SolverArgs,
    /// Axis and values, e.g. hbar=-1,-0.6,-0.2 (axes: hbar, n, beta).
    #[arg(long, allow_hyphen_values = true)]
    sweep: String,
    /// Output directory.
    #[arg(long, default_value = "lahoc-out")]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    ProblemFile(#[from] ProblemFileError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

struct Loaded {
    name: String,
    problem: OCProblem,
    system: Option<SystemSpec>,
    default_times: Vec<f64>,
}

fn load(source: &Source) -> Result<Loaded, CliError> {
    if let Some(name) = &source.builtin {
        let b = Builtin::from_name(name)
            .ok_or_else(|| CliError::Usage(format!("unknown builtin '{name}' (expected tp31 or tp32)")))?;
        return Ok(Loaded { name: b.name().into(), problem: b.problem(), system: Some(b.system()), default_times: b.report_times() });
    }
    let path = source.problem.as_ref().expect("clap enforces one source");
    let problem = read_problem(path)?;
    Ok(Loaded { name: path.display().to_string(), problem, system: None, default_times: log_times(20, 40.0) })
}

fn log_times(count: usize, t_end: f64) -> Vec<f64> {
    let (a, b) = (0.01f64.ln(), t_end.ln());
    match count {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect(),
    }
}

fn solver_config(a: &SolverArgs) -> Result<SolverConfig, CliError> {
    if a.n < 4 {
        return Err(CliError::Usage(format!("--n must be at least 4, got {}", a.n)));
    }
    Ok(SolverConfig::new(a.hbar, a.orders, a.tol, BasisConfig::glr(a.beta, a.n)?)?)
}

fn oracle_config(a: &OracleArgs) -> Result<TruncationConfig, CliError> {
    let mut cfg = TruncationConfig { t_end: a.t_end, ..Default::default() };
    if let Some(m) = a.mesh {
        cfg.mesh = MeshLayout::Points(m);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

const EXIT_DIVERGED: u8 = 2;
const EXIT_COMPARE: u8 = 3;

fn run(args: &RunArgs) -> Result<u8, CliError> {
    let loaded = load(&args.source)?;
    let config = solver_config(&args.solver)?;
    let times = match (&args.times, args.log_times) {
        (Some(t), _) => t.clone(),
        (None, Some(c)) => log_times(c, args.oracle.t_end),
        (None, None) => loaded.default_times.clone(),
    };
    if times.is_empty() {
        return Err(CliError::Usage("no report times".into()));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::Usage(format!("report time {t} must be finite and non-negative")));
    }
    let oracle_cfg = if args.compare {
        let cfg = oracle_config(&args.oracle)?;
        if let Some(t) = times.iter().find(|t| **t > cfg.t_end) {
            return Err(CliError::Usage(format!("report time {t} exceeds --t-end {}", cfg.t_end)));
        }
        if !(args.compare_tol > 0.0) {
            return Err(CliError::Usage("--compare-tol must be positive".into()));
        }
        Some(cfg)
    } else {
        None
    };

    let solution = solve_problem(&loaded.problem, loaded.system.as_ref(), &config, &times, None, args.solver.lipschitz)?;
    let comparison = match &oracle_cfg {
        Some(cfg) => {
            let system = match &loaded.system {
                Some(s) => s.clone(),
                None => lahoc::ocp_model::derive_tpbvp(&loaded.problem)?,
            };
            let oracle = solve_truncated(&system, cfg)?;
            Some((compare(&RunTrajectory::new(&solution.run), &oracle, &times)?, oracle.mesh.len()))
        }
        None => None,
    };

    create_dir(&args.out)?;
    report::write_trajectories(&args.out.join("trajectories.csv"), &loaded.problem, &solution.bundle)?;
    report::write_convergence(&args.out.join("convergence.csv"), &solution.bundle)?;
    let summary = summary_text(&loaded.name, &args.solver, &solution, comparison.as_ref(), args.compare_tol);
    let path = args.out.join("summary.txt");
    fs::write(&path, &summary).map_err(io_err(&path))?;
    print!("{summary}");

    if let Termination::Diverged { .. } = solution.bundle.termination {
        return Ok(EXIT_DIVERGED);
    }
    if let Some((c, _)) = &comparison {
        if !(c.max() <= args.compare_tol) {
            return Ok(EXIT_COMPARE);
        }
    }
    Ok(0)
}

fn summary_text(name: &str, a: &SolverArgs, sol: &OcpSolution, comparison: Option<&(Comparison, usize)>, tol: f64) -> String {
    use report::sci;
    let b = &sol.bundle;
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k}: {v}\n"));
    line("problem", name.to_string());
    line("n", a.n.to_string());
    line("beta", sci(a.beta));
    line("hbar", sci(a.hbar));
    line("max_orders", a.orders.to_string());
    line("tail_tol", sci(a.tol));
    line("termination", b.termination.to_string());
    line("orders_used", b.orders_used.to_string());
    line("final_tail_norm", sci(*b.tail_norms.last().unwrap_or(&f64::NAN)));
    line("cost", sci(b.cost));
    if b.cost_overflow_warning {
        line("cost_warning", "quadrature weights near overflow".into());
    }
    line("operator_condition", sol.run.operator_condition.map(sci).unwrap_or_else(|| "n/a".into()));
    line(
        "gamma",
        match (a.lipschitz, b.gamma) {
            (None, _) => "not computed (no --lipschitz)".into(),
            (Some(_), Some(g)) => sci(g),
            (Some(_), None) => "undefined".into(),
        },
    );
    if let Some((c, points)) = comparison {
        line("oracle_mesh_points", points.to_string());
        for (i, d) in c.per_component.iter().enumerate() {
            line(&format!("deviation_z{}", i + 1), format!("{} at t={}", sci(d.max), sci(d.at)));
        }
        line("max_deviation", sci(c.max()));
        line("compare_tol", sci(tol));
        line("comparison", if c.max() <= tol { "pass" } else { "fail" }.into());
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    Hbar,
    N,
    Beta,
}

fn parse_sweep(spec: &str) -> Result<(Axis, Vec<f64>), CliError> {
    let (axis, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--sweep expects <axis>=<list>, got '{spec}'")))?;
    let axis = match axis.trim() {
        "hbar" => Axis::Hbar,
        "n" => Axis::N,
        "beta" => Axis::Beta,
        other => return Err(CliError::Usage(format!("unknown sweep axis '{other}' (expected hbar, n or beta)"))),
    };
    let values: Vec<f64> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("sweep value '{s}' is not a number"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("sweep axis has no values".into()));
    }
    if axis == Axis::N && values.iter().any(|v| v.fract() != 0.0 || *v < 4.0) {
        return Err(CliError::Usage("n values must be integers >= 4".into()));
    }
    Ok((axis, values))
}

fn sweep(args: &SweepArgs) -> Result<u8, CliError> {
    let (axis, values) = parse_sweep(&args.sweep)?;
    let loaded = load(&args.source)?;
    solver_config(&args.solver)?;
    let shared: Option<Arc<BasisRule>> = match axis {
        Axis::Hbar => Some(Arc::new(build_rule(BasisConfig::glr(args.solver.beta, args.solver.n)?)?)),
        _ => None,
    };
    let mut rows = Vec::new();
    for &v in &values {
        let mut a = args.solver.clone();
        match axis {
            Axis::Hbar => a.hbar = v,
            Axis::N => a.n = v as usize,
            Axis::Beta => a.beta = v,
        }
        let outcome = solver_config(&a).and_then(|cfg| {
            Ok(solve_problem(&loaded.problem, loaded.system.as_ref(), &cfg, &[], shared.clone(), None)?)
        });
        rows.push(report::SweepRow::new(v, outcome.map(|s| s.bundle).map_err(|e| e.to_string())));
    }
    create_dir(&args.out)?;
    let path = args.out.join("sweep.csv");
    let table = report::write_sweep(&path, axis_name(axis), &rows)?;
    print!("{table}");
    Ok(0)
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::Hbar => "hbar",
        Axis::N => "n",
        Axis::Beta => "beta",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
