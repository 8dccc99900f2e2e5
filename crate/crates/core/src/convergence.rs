//! Grid-refinement studies for manufactured solutions: per-grid solves, error
//! evaluation, log-log rate fits and CSV / plot-data output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::cg::CgOptions;
use crate::error::{Error, Result};
use crate::mesh_fe::{uniform_grid, Boundary, P1Space};
use crate::norms::{error_triple, AnalyticalSolution, ErrorTriple};
use crate::spacetime_system::{solve_problem, OperatorOptions};

pub const CSV_HEADER: &str = "M,N,h,err_c0_l2,err_l2_h1,err_l2_hm1_dt";
pub const NORM_NAMES: [&str; 3] = ["err_c0_l2", "err_l2_h1", "err_l2_hm1_dt"];
/// Rates are fitted over this many of the finest valid rows.
pub const DEFAULT_FIT_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

impl Example {
    pub const ALL: [Example; 3] = [Example::Ex1, Example::Ex2, Example::Ex3];

    pub fn solution(self) -> AnalyticalSolution {
        match self {
            Example::Ex1 => AnalyticalSolution::ex1(),
            Example::Ex2 => AnalyticalSolution::ex2(),
            Example::Ex3 => AnalyticalSolution::ex3(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Example::Ex1 => "ex1",
            Example::Ex2 => "ex2",
            Example::Ex3 => "ex3",
        }
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(Example::Ex1),
            "ex2" => Ok(Example::Ex2),
            "ex3" => Ok(Example::Ex3),
            other => Err(Error::InvalidArgument(format!("unknown example `{other}`"))),
        }
    }
}

/// Mesh size `h = √((M−1)⁻² + (N−1)⁻²)` for `M` time and `N` space nodes on unit intervals.
pub fn mesh_size(m: usize, n: usize) -> f64 {
    let (a, b) = ((m - 1) as f64, (n - 1) as f64);
    (a.powi(-2) + b.powi(-2)).sqrt()
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub exact: AnalyticalSolution,
    /// Node counts, used for both time and space (`N = M`).
    pub node_counts: Vec<usize>,
    pub final_time: f64,
    pub operator: OperatorOptions,
    pub cg: CgOptions,
    pub fit_window: usize,
}

impl StudyConfig {
    pub fn new(exact: AnalyticalSolution, node_counts: Vec<usize>) -> Self {
        Self {
            exact,
            node_counts,
            final_time: 1.0,
            operator: OperatorOptions::default(),
            cg: CgOptions::default(),
            fit_window: DEFAULT_FIT_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_counts.is_empty() {
            return Err(Error::InvalidArgument("no grid sizes given".into()));
        }
        if let Some(&n) = self.node_counts.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidArgument(format!("grid size {n} is below the minimum of 3 nodes")));
        }
        if self.node_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("grid sizes must be strictly increasing".into()));
        }
        if self.fit_window < 2 {
            return Err(Error::InvalidArgument("the rate fit window needs at least 2 rows".into()));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidArgument("final time must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub m: usize,
    pub n: usize,
    pub h: f64,
    /// `None` when the solve for this grid failed.
    pub errors: Option<ErrorTriple>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted rates for the three norms, when at least two valid rows exist.
    pub rates: Option<[f64; 3]>,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<ConvergenceRow>, fit_window: usize) -> Self {
        let rates = fit_table_rates(&rows, fit_window);
        Self { rows, rates }
    }
}

/// Solves and measures one grid.
pub fn run_single(exact: &AnalyticalSolution, m: usize, n: usize, config: &StudyConfig) -> Result<ErrorTriple> {
    let time = P1Space::new(uniform_grid(0.0, config.final_time, m)?, Boundary::Free)?;
    let space = P1Space::new(uniform_grid(0.0, 1.0, n)?, Boundary::DirichletZero)?;
    let (op, sol) = solve_problem(&time, &space, &exact.source, config.operator, &config.cg)?;
    error_triple(&sol, exact, op.riesz())
}

/// Runs every grid of the study, in parallel; row order follows `node_counts`.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    config.validate()?;
    let rows: Vec<ConvergenceRow> = config
        .node_counts
        .par_iter()
        .map(|&k| ConvergenceRow {
            m: k,
            n: k,
            h: mesh_size(k, k),
            errors: run_single(&config.exact, k, k, config).ok(),
        })
        .collect();
    Ok(ConvergenceTable::from_rows(rows, config.fit_window))
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], errors: &[f64]) -> Result<f64> {
    if h.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), found: errors.len() });
    }
    if h.len() < 2 {
        return Err(Error::InvalidArgument("a rate fit needs at least two points".into()));
    }
    if h.iter().chain(errors).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("rate fit needs positive, finite values".into()));
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct h values".into()));
    }
    Ok(sxy / sxx)
}

/// Rates over the finest `window` valid rows.
pub fn fit_table_rates(rows: &[ConvergenceRow], window: usize) -> Option<[f64; 3]> {
    let valid: Vec<(f64, ErrorTriple)> = rows.iter().filter_map(|r| r.errors.map(|e| (r.h, e))).collect();
    if valid.len() < 2 {
        return None;
    }
    let mut finest = valid;
    finest.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tail = &finest[finest.len().saturating_sub(window.max(2))..];
    let h: Vec<f64> = tail.iter().map(|(h, _)| *h).collect();
    let mut rates = [0.0; 3];
    for (k, rate) in rates.iter_mut().enumerate() {
        let e: Vec<f64> = tail.iter().map(|(_, e)| e.as_array()[k]).collect();
        *rate = fit_rate(&h, &e).ok()?;
    }
    Some(rates)
}

pub fn to_csv(table: &ConvergenceTable) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for r in &table.rows {
        let e = r.errors.map_or([f64::NAN; 3], |e| e.as_array());
        writeln!(out, "{},{},{},{},{},{}", r.m, r.n, r.h, e[0], e[1], e[2]).unwrap();
    }
    if let Some(p) = table.rates {
        writeln!(out, "# rates,{},{},{}", p[0], p[1], p[2]).unwrap();
    }
    out
}

pub fn parse_csv(text: &str) -> Result<ConvergenceTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    let mut table = ConvergenceTable::default();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if let Some(rest) = line.strip_prefix("# rates,") {
            let p: Vec<f64> = rest.split(',').map(parse_f).collect::<Result<_>>()?;
            if p.len() != 3 {
                return Err(Error::Parse(format!("bad rates line `{line}`")));
            }
            table.rates = Some([p[0], p[1], p[2]]);
            continue;
        }
        if fields.len() != 6 {
            return Err(Error::Parse(format!("expected 6 fields in `{line}`")));
        }
        let parse_u = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let e = [parse_f(fields[3])?, parse_f(fields[4])?, parse_f(fields[5])?];
        table.rows.push(ConvergenceRow {
            m: parse_u(fields[0])?,
            n: parse_u(fields[1])?,
            h: parse_f(fields[2])?,
            errors: if e.iter().any(|v| v.is_nan()) {
                None
            } else {
                Some(ErrorTriple { c0_l2: e[0], l2_h1: e[1], l2_hm1_dt: e[2] })
            },
        });
    }
    Ok(table)
}

/// One `h err` block per norm, separated by blank lines.
pub fn to_plot_data(table: &ConvergenceTable) -> String {
    let mut out = String::new();
    for (k, name) in NORM_NAMES.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        writeln!(out, "# {name}").unwrap();
        for r in &table.rows {
            if let Some(e) = r.errors {
                writeln!(out, "{} {}", r.h, e.as_array()[k]).unwrap();
            }
        }
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.dat`.
pub fn write_outputs(table: &ConvergenceTable, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let csv = dir.join(format!("{stem}.csv"));
    let dat = dir.join(format!("{stem}.dat"));
    write_file(&csv, &to_csv(table))?;
    write_file(&dat, &to_plot_data(table))?;
    Ok((csv, dat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_rate_examples() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e1: Vec<f64> = h.iter().map(|&x| x).collect();
        assert!((fit_rate(&h, &e1).unwrap() - 1.0).abs() < 1e-12);
        let e2: Vec<f64> = h.iter().map(|&x| 3.0 * x * x).collect();
        assert!((fit_rate(&h, &e2).unwrap() - 2.0).abs() < 1e-12);
        // h^0.5 with ±1% multiplicative perturbation
        let noise = [1.01, 0.99, 1.01, 0.99];
        let e3: Vec<f64> = h.iter().zip(noise).map(|(&x, s)| x.sqrt() * s).collect();
        assert!((fit_rate(&h, &e3).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn fit_rate_rejects_bad_input() {
        assert!(fit_rate(&[0.1, 0.05], &[1.0, 0.0]).is_err());
        assert!(fit_rate(&[0.1, -0.05], &[1.0, 0.5]).is_err());
        assert!(fit_rate(&[0.1], &[1.0]).is_err());
        assert!(fit_rate(&[0.1, 0.05], &[1.0]).is_err());
    }

    #[test]
    fn mesh_size_formula() {
        assert!((mesh_size(17, 17) - (2.0f64).sqrt() / 16.0).abs() < 1e-15);
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(to_csv(&ConvergenceTable::default()), format!("{CSV_HEADER}\n"));
    }

    fn synthetic_table() -> ConvergenceTable {
        let rows: Vec<ConvergenceRow> = [17usize, 33, 65, 129]
            .iter()
            .map(|&k| {
                let h = mesh_size(k, k);
                ConvergenceRow {
                    m: k,
                    n: k,
                    h,
                    errors: Some(ErrorTriple { c0_l2: 0.3 * h * h, l2_h1: 1.7 * h, l2_hm1_dt: 0.1 / 3.0 * h }),
                }
            })
            .collect();
        ConvergenceTable::from_rows(rows, 3)
    }

    #[test]
    fn csv_structure_and_roundtrip() {
        let table = synthetic_table();
        let csv = to_csv(&table);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("# rates,"));
        assert_eq!(parse_csv(&csv).unwrap(), table);
    }

    #[test]
    fn invalid_rows_survive_roundtrip_and_are_skipped_in_fits() {
        let mut table = synthetic_table();
        table.rows[1].errors = None;
        table.rates = fit_table_rates(&table.rows, 3);
        let rates = table.rates.unwrap();
        assert!((rates[0] - 2.0).abs() < 1e-10);
        assert_eq!(parse_csv(&to_csv(&table)).unwrap(), table);
    }

    #[test]
    fn plot_data_has_one_block_per_norm() {
        let text = to_plot_data(&synthetic_table());
        assert_eq!(text.split("\n\n\n").count(), 3);
        assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 3);
    }

    #[test]
    fn config_validation() {
        let ex = AnalyticalSolution::ex1();
        assert!(StudyConfig::new(ex.clone(), vec![17, 9]).validate().is_err());
        assert!(StudyConfig::new(ex.clone(), vec![2, 9]).validate().is_err());
        assert!(StudyConfig::new(ex.clone(), vec![]).validate().is_err());
        assert!(StudyConfig::new(ex, vec![5, 9, 17]).validate().is_ok());
    }

    #[test]
    fn write_outputs_reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_outputs(&ConvergenceTable::default(), &blocker.join("sub"), "t").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
