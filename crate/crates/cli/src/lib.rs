//! Command-line front end: single solves, convergence studies and the
//! reduced-basis greedy, configured by flags and an optional TOML file.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use stlsq::cg::CgOptions;
use stlsq::convergence::{mesh_size, run_study, to_csv, write_outputs, Example, StudyConfig};
use stlsq::mesh_fe::{uniform_grid, Boundary, P1Space};
use stlsq::norms::{error_triple, AnalyticalSolution};
use stlsq::rb_greedy::{
    certify, greedy, log_midpoints, log_spaced, write_greedy_outputs, FamilyKind, GreedyConfig, GreedyStatus,
    ParamFamily, Tolerance,
};
use stlsq::spacetime_system::{
    scalar_fn, solve_problem, OperatorOptions, SeparableSource, SolverMode, SourceTerm, SpaceTimeSolution,
};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<stlsq::Error> for CliError {
    fn from(e: stlsq::Error) -> Self {
        use stlsq::Error as E;
        match e {
            E::Io { path, source } => CliError::Io { path, source },
            E::InvalidArgument(_) | E::InvalidParameter { .. } | E::Parse(_) => CliError::Usage(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "stlsq", version, about = "Space-time least-squares heat equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve one instance and write nodal values.
    Solve(CommonArgs),
    /// Run a grid-refinement study and fit convergence rates.
    Convergence(CommonArgs),
    /// Build a reduced basis by the weak greedy and certify it.
    Greedy(GreedyArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// ex1, ex2, ex3 or zero
    #[arg(long)]
    example: Option<String>,
    /// Node counts, comma separated (solve: `N` or `M,N`)
    #[arg(long)]
    grids: Option<String>,
    /// dense or cg
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file with defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GreedyArgs {
    /// TOML file describing the parameter family
    #[arg(long)]
    family: Option<PathBuf>,
    #[arg(long)]
    train_size: Option<usize>,
    /// Tolerance relative to the largest empty-basis estimator
    #[arg(long)]
    eps_tol: Option<f64>,
    /// `lo,hi`
    #[arg(long)]
    mu_range: Option<String>,
    #[arg(long)]
    max_basis: Option<usize>,
    /// Number of held-out parameters for certification
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Keys accepted in `--config` files. Flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    example: Option<String>,
    grids: Option<Vec<usize>>,
    solver: Option<String>,
    cg_tol: Option<f64>,
    out: Option<PathBuf>,
    family: Option<PathBuf>,
    train_size: Option<usize>,
    eps_tol: Option<f64>,
    mu_range: Option<[f64; 2]>,
    max_basis: Option<usize>,
    test_size: Option<usize>,
}

/// Parameter-family description read from `--family`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// `scaled_laplacian` or `diffusion_reaction`
    pub kind: String,
    pub mu_range: [f64; 2],
    #[serde(default = "default_truth_nodes")]
    pub time_nodes: usize,
    #[serde(default = "default_truth_nodes")]
    pub space_nodes: usize,
    /// `sin_pi`, `tent` or `zero`
    #[serde(default = "default_initial")]
    pub initial: String,
    /// `zero` or `unit` (f ≡ 1)
    #[serde(default = "default_source")]
    pub source: String,
}

fn default_truth_nodes() -> usize {
    33
}

fn default_initial() -> String {
    "sin_pi".into()
}

fn default_source() -> String {
    "zero".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleChoice {
    Known(Example),
    Zero,
}

impl ExampleChoice {
    fn name(self) -> &'static str {
        match self {
            ExampleChoice::Known(e) => e.name(),
            ExampleChoice::Zero => "zero",
        }
    }

    fn solution(self) -> AnalyticalSolution {
        match self {
            ExampleChoice::Known(e) => e.solution(),
            ExampleChoice::Zero => AnalyticalSolution::zero(),
        }
    }
}

impl FromStr for ExampleChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        if s == "zero" {
            return Ok(ExampleChoice::Zero);
        }
        Example::from_str(s)
            .map(ExampleChoice::Known)
            .map_err(|_| CliError::Usage(format!("unknown example `{s}` (expected ex1, ex2, ex3 or zero)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub mode: SolverMode,
    pub cg_tol: f64,
}

impl SolverSettings {
    fn operator(&self) -> OperatorOptions {
        OperatorOptions::with_mode(self.mode)
    }

    fn cg(&self) -> CgOptions {
        CgOptions { tol: self.cg_tol, ..CgOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Solve { example: ExampleChoice, m: usize, n: usize, solver: SolverSettings, out: PathBuf },
    Convergence { example: ExampleChoice, grids: Vec<usize>, solver: SolverSettings, out: PathBuf },
    Greedy {
        family: FamilySpec,
        train_size: usize,
        eps_tol: f64,
        max_basis: usize,
        test_size: usize,
        solver: SolverSettings,
        out: PathBuf,
    },
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => toml::from_str(&read_text(p)?)
            .map_err(|e| CliError::Usage(format!("{}: {}", p.display(), e.message()))),
    }
}

pub fn read_family(path: &Path) -> CliResult<FamilySpec> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| CliError::Usage(format!("invalid {what} `{s}`"))))
        .collect()
}

fn solver_settings(solver: Option<String>, cg_tol: Option<f64>) -> CliResult<SolverSettings> {
    let mode = match solver.as_deref() {
        None => SolverMode::Auto,
        Some("dense") => SolverMode::Dense,
        Some("cg") => SolverMode::MatrixFree,
        Some(other) => return Err(CliError::Usage(format!("unknown solver `{other}` (expected dense or cg)"))),
    };
    let cg_tol = cg_tol.unwrap_or(1e-10);
    if !(cg_tol > 0.0) {
        return Err(CliError::Usage(format!("--cg-tol must be positive, got {cg_tol}")));
    }
    Ok(SolverSettings { mode, cg_tol })
}

fn common_config(args: CommonArgs, solve: bool) -> CliResult<RunConfig> {
    let file = read_file_config(args.config.as_deref())?;
    let example: ExampleChoice = args
        .example
        .or(file.example)
        .ok_or_else(|| CliError::Usage("--example is required".into()))?
        .parse()?;
    let grids = match args.grids {
        Some(g) => parse_list::<usize>(&g, "grid list")?,
        None => file.grids.ok_or_else(|| CliError::Usage("--grids is required".into()))?,
    };
    let solver = solver_settings(args.solver.or(file.solver), args.cg_tol.or(file.cg_tol))?;
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
    if solve {
        let (m, n) = match grids[..] {
            [n] => (n, n),
            [m, n] => (m, n),
            _ => return Err(CliError::Usage("solve takes `--grids N` or `--grids M,N`".into())),
        };
        if m < 2 || n < 3 {
            return Err(CliError::Usage(format!("grid {m}x{n} too small (need M >= 2, N >= 3)")));
        }
        Ok(RunConfig::Solve { example, m, n, solver, out })
    } else {
        Ok(RunConfig::Convergence { example, grids, solver, out })
    }
}

fn greedy_config(args: GreedyArgs) -> CliResult<RunConfig> {
    let file = read_file_config(args.config.as_deref())?;
    let family_path = args
        .family
        .or(file.family)
        .ok_or_else(|| CliError::Usage("greedy requires --family <file>".into()))?;
    let mut family = read_family(&family_path)?;
    if let Some(r) = args.mu_range {
        let v = parse_list::<f64>(&r, "parameter range")?;
        let [lo, hi] = v[..] else {
            return Err(CliError::Usage(format!("--mu-range expects `lo,hi`, got `{r}`")));
        };
        family.mu_range = [lo, hi];
    } else if let Some(r) = file.mu_range {
        family.mu_range = r;
    }
    let train_size = args.train_size.or(file.train_size).unwrap_or(50);
    let eps_tol = args.eps_tol.or(file.eps_tol).unwrap_or(1e-4);
    let max_basis = args.max_basis.or(file.max_basis).unwrap_or(30);
    let test_size = args.test_size.or(file.test_size).unwrap_or(20);
    if train_size == 0 || max_basis == 0 || !(eps_tol > 0.0) {
        return Err(CliError::Usage("--train-size, --max-basis and --eps-tol must be positive".into()));
    }
    let solver = solver_settings(args.solver.or(file.solver), args.cg_tol.or(file.cg_tol))?;
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
    Ok(RunConfig::Greedy { family, train_size, eps_tol, max_basis, test_size, solver, out })
}

/// Parses `argv` (including the program name). Help and version requests come
/// back as `Err` carrying clap's rendered text and exit code 0.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseOutcome::Clap)?;
    match cli.command {
        Cmd::Solve(a) => common_config(a, true),
        Cmd::Convergence(a) => common_config(a, false),
        Cmd::Greedy(a) => greedy_config(a),
    }
    .map_err(ParseOutcome::Cli)
}

#[derive(Debug)]
pub enum ParseOutcome {
    Clap(clap::Error),
    Cli(CliError),
}

fn time_and_space(m: usize, n: usize) -> CliResult<(P1Space, P1Space)> {
    let time = P1Space::new(uniform_grid(0.0, 1.0, m)?, Boundary::Free)?;
    let space = P1Space::new(uniform_grid(0.0, 1.0, n)?, Boundary::DirichletZero)?;
    Ok((time, space))
}

/// `t,x,y` for every space-time node, boundary nodes included.
pub fn solution_csv(sol: &SpaceTimeSolution) -> String {
    let mut out = String::from("t,x,y\n");
    for (t, x, v) in sol.nodal_values() {
        writeln!(out, "{t},{x},{v}").unwrap();
    }
    out
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))
        .and_then(|_| fs::write(path, text))
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn build_family(spec: &FamilySpec, solver: &SolverSettings) -> CliResult<ParamFamily> {
    let kind = match spec.kind.as_str() {
        "scaled_laplacian" => FamilyKind::ScaledLaplacian,
        "diffusion_reaction" => FamilyKind::DiffusionReaction,
        other => return Err(CliError::Usage(format!("unknown family kind `{other}`"))),
    };
    let y0 = match spec.initial.as_str() {
        "sin_pi" => scalar_fn(|x| (PI * x).sin()),
        "tent" => scalar_fn(|x| 0.5 - (x - 0.5).abs()),
        "zero" => scalar_fn(|_| 0.0),
        other => return Err(CliError::Usage(format!("unknown initial datum `{other}`"))),
    };
    let terms = match spec.source.as_str() {
        "zero" => Vec::new(),
        "unit" => vec![SourceTerm::new(scalar_fn(|_| 1.0), scalar_fn(|_| 1.0))],
        other => return Err(CliError::Usage(format!("unknown source `{other}`"))),
    };
    let mut source = SeparableSource::new(terms, y0);
    if spec.initial == "tent" {
        source = source.with_y0_breakpoints(vec![0.5]);
    }
    let (time, space) = time_and_space(spec.time_nodes, spec.space_nodes)?;
    let family = ParamFamily::new(kind, (spec.mu_range[0], spec.mu_range[1]), time, space, source)?;
    Ok(family.with_truth_options(solver.operator(), CgOptions { tol: solver.cg_tol.min(1e-12), ..CgOptions::default() }))
}

/// Runs the configured pipeline and returns a short report for stdout.
pub fn dispatch(config: &RunConfig) -> CliResult<String> {
    match config {
        RunConfig::Solve { example, m, n, solver, out } => {
            let exact = example.solution();
            let (time, space) = time_and_space(*m, *n)?;
            let (op, sol) = solve_problem(&time, &space, &exact.source, solver.operator(), &solver.cg())?;
            let path = out.join(format!("solve_{}_{m}x{n}.csv", example.name()));
            write(&path, &solution_csv(&sol))?;
            let errors = error_triple(&sol, &exact, op.riesz())?;
            Ok(format!(
                "wrote {}\nh = {}\nerrors (C0(L2), L2(H1), L2(H-1) of dt): {} {} {}\n",
                path.display(),
                mesh_size(*m, *n),
                errors.c0_l2,
                errors.l2_h1,
                errors.l2_hm1_dt
            ))
        }
        RunConfig::Convergence { example, grids, solver, out } => {
            let mut study = StudyConfig::new(example.solution(), grids.clone());
            study.operator = solver.operator();
            study.cg = solver.cg();
            let table = run_study(&study)?;
            fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.clone(), source })?;
            let (csv, dat) = write_outputs(&table, out, &format!("convergence_{}", example.name()))?;
            let failed = table.rows.iter().filter(|r| r.errors.is_none()).count();
            let mut report = format!("wrote {} and {}\n{}", csv.display(), dat.display(), to_csv(&table));
            if failed > 0 {
                report.push_str(&format!("{failed} grid(s) failed to solve\n"));
                return Err(CliError::Solver(report));
            }
            Ok(report)
        }
        RunConfig::Greedy { family, train_size, eps_tol, max_basis, test_size, solver, out } => {
            let fam = build_family(family, solver)?;
            let (lo, hi) = fam.mu_range();
            let training = if lo > 0.0 { log_spaced(lo, hi, *train_size) } else { linear(lo, hi, *train_size) };
            let cfg = GreedyConfig {
                training,
                tolerance: Tolerance::Relative(*eps_tol),
                max_basis: *max_basis,
                coercivity: None,
            };
            let result = greedy(&fam, &cfg)?;
            let held_out = if lo > 0.0 { log_midpoints(lo, hi, *test_size) } else { linear_mid(lo, hi, *test_size) };
            let records = certify(&result, &fam, &held_out)?;
            fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.clone(), source })?;
            let (it, cert) = write_greedy_outputs(&result, &records, out)?;
            let uncertified = records.iter().filter(|r| !r.certified()).count();
            let report = format!(
                "wrote {} and {}\nbasis size {}, status {:?}, initial estimator {}, tolerance {}\n{} of {} held-out parameters certified\n",
                it.display(),
                cert.display(),
                result.len(),
                result.status,
                result.initial_estimator,
                result.tolerance,
                records.len() - uncertified,
                records.len()
            );
            if result.status != GreedyStatus::Converged {
                return Err(CliError::Solver(format!("{report}greedy stopped before reaching the tolerance\n")));
            }
            Ok(report)
        }
    }
}

fn linear(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

fn linear_mid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / count as f64).collect()
}

/// Full CLI entry point: parse, dispatch, print, map to an exit code.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(ParseOutcome::Cli(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match dispatch(&config) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<RunConfig, ParseOutcome> {
        parse_args(std::iter::once("stlsq").chain(args.iter().copied()))
    }

    #[test]
    fn convergence_flags() {
        let c = parse(&["convergence", "--example", "ex1", "--grids", "17,33,65,129", "--out", "results/"]).unwrap();
        match c {
            RunConfig::Convergence { example, grids, out, solver } => {
                assert_eq!(example, ExampleChoice::Known(Example::Ex1));
                assert_eq!(grids, vec![17, 33, 65, 129]);
                assert_eq!(out, PathBuf::from("results/"));
                assert_eq!(solver.mode, SolverMode::Auto);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn solve_single_grid() {
        let c = parse(&["solve", "--example", "ex2", "--grids", "65", "--solver", "cg"]).unwrap();
        assert!(matches!(c, RunConfig::Solve { m: 65, n: 65, .. }));
    }

    #[test]
    fn greedy_without_family_is_usage_error() {
        match parse(&["greedy"]) {
            Err(ParseOutcome::Cli(e)) => assert_eq!(e.exit_code(), EXIT_USAGE),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_flag_and_bad_values() {
        assert!(matches!(parse(&["solve", "--bogus"]), Err(ParseOutcome::Clap(_))));
        for args in [
            &["solve", "--example", "ex9", "--grids", "9"][..],
            &["solve", "--example", "ex1", "--grids", "9,9,9"],
            &["solve", "--example", "ex1", "--grids", "x"],
            &["solve", "--example", "ex1", "--grids", "9", "--solver", "lu"],
            &["solve", "--example", "ex1", "--grids", "9", "--cg-tol=-1"],
            &["solve", "--grids", "9"],
        ] {
            match parse(args) {
                Err(ParseOutcome::Cli(e)) => assert_eq!(e.exit_code(), EXIT_USAGE, "{args:?}"),
                other => panic!("{args:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_config_file_is_io_error() {
        match parse(&["solve", "--config", "/nonexistent/cfg.toml"]) {
            Err(ParseOutcome::Cli(e)) => assert_eq!(e.exit_code(), EXIT_IO),
            other => panic!("{other:?}"),
        }
    }
}
