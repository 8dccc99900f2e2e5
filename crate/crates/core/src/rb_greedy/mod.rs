//! Parameter-dependent heat operators `A(μ)`, the residual-based estimator
//! `Δ(W_N, μ) = ‖r(μ; ·)‖_{W*} / C_s`, and the weak greedy construction of a
//! reduced space from truth snapshots.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cg::CgOptions;
use crate::convergence::write_file;
use crate::error::{Error, Result};
use crate::mesh_fe::{assemble_mass, assemble_stiffness, axpy, dot, uniform_grid, Boundary, P1Space, SymMatrix};
use crate::norms::residual_dual_norm;
use crate::spacetime_system::{
    assemble_rhs, scalar_fn, OperatorOptions, SeparableSource, SolverMode, SpaceTimeOperator, SpaceTimeSolution,
};

/// How `a(μ; ·, ·)` depends on the scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// `a(μ; u, v) = μ ∫ u'v'`
    ScaledLaplacian,
    /// `a(μ; u, v) = ∫ u'v' + μ ∫ uv`, `μ ≥ 0`
    DiffusionReaction,
}

/// Parameter family on a fixed truth grid, with μ-independent data.
#[derive(Debug, Clone)]
pub struct ParamFamily {
    kind: FamilyKind,
    mu_min: f64,
    mu_max: f64,
    time_space: P1Space,
    space: P1Space,
    source: SeparableSource,
    reference_stiffness: SymMatrix,
    mass: SymMatrix,
    c_c: f64,
    c_s: f64,
    truth_options: OperatorOptions,
    cg: CgOptions,
    gram: SpaceTimeOperator,
}

impl ParamFamily {
    pub fn new(
        kind: FamilyKind,
        mu_range: (f64, f64),
        time_space: P1Space,
        space: P1Space,
        source: SeparableSource,
    ) -> Result<Self> {
        let (mu_min, mu_max) = mu_range;
        if !(mu_min <= mu_max) || !mu_min.is_finite() || !mu_max.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid parameter range [{mu_min}, {mu_max}]")));
        }
        let (c_c, c_s) = match kind {
            FamilyKind::ScaledLaplacian => {
                if !(mu_min > 0.0) {
                    return Err(Error::InvalidParameter { mu: mu_min, reason: "diffusion must be positive".into() });
                }
                (mu_min, mu_max)
            }
            // ∫ u² ≤ π⁻² ∫ u'² holds on (0, 1) and, by min-max, for P1 functions
            FamilyKind::DiffusionReaction => {
                if mu_min < 0.0 {
                    return Err(Error::InvalidParameter { mu: mu_min, reason: "reaction must be non-negative".into() });
                }
                (1.0, 1.0 + mu_max / (PI * PI))
            }
        };
        let reference_stiffness = assemble_stiffness(&space);
        let mass = assemble_mass(&space);
        let gram = SpaceTimeOperator::with_stiffness(
            &time_space,
            &space,
            reference_stiffness.clone(),
            OperatorOptions::with_mode(SolverMode::Auto),
        )?
        .gram(OperatorOptions::with_mode(SolverMode::Auto))?;
        Ok(Self {
            kind,
            mu_min,
            mu_max,
            time_space,
            space,
            source,
            reference_stiffness,
            mass,
            c_c,
            c_s,
            truth_options: OperatorOptions::default(),
            cg: CgOptions { tol: 1e-12, ..CgOptions::default() },
            gram,
        })
    }

    /// `a(μ; u, v) = μ ∫ u'v'` on `(0, 1)`, `μ ∈ [0.1, 10]`, `f = 0`, `y₀ = sin(πx)`.
    pub fn heat_demo(time_nodes: usize, space_nodes: usize) -> Result<Self> {
        let time = P1Space::new(uniform_grid(0.0, 1.0, time_nodes)?, Boundary::Free)?;
        let space = P1Space::new(uniform_grid(0.0, 1.0, space_nodes)?, Boundary::DirichletZero)?;
        let source = SeparableSource::new(Vec::new(), scalar_fn(|x| (PI * x).sin()));
        Self::new(FamilyKind::ScaledLaplacian, (0.1, 10.0), time, space, source)
    }

    pub fn with_truth_options(mut self, options: OperatorOptions, cg: CgOptions) -> Self {
        self.truth_options = options;
        self.cg = cg;
        self
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn mu_range(&self) -> (f64, f64) {
        (self.mu_min, self.mu_max)
    }

    /// `(c_c, c_s)` with `c_c ‖v‖²_V ≤ a(μ; v, v) ≤ c_s ‖v‖²_V`.
    pub fn constants(&self) -> (f64, f64) {
        (self.c_c, self.c_s)
    }

    /// μ-uniform coercivity constant of `b(μ)` in the reference W(0,T) norm.
    pub fn coercivity_lower_bound(&self) -> f64 {
        self.c_c.min(1.0 / self.c_s).min(1.0)
    }

    pub fn time_space(&self) -> &P1Space {
        &self.time_space
    }

    pub fn space(&self) -> &P1Space {
        &self.space
    }

    pub fn source(&self) -> &SeparableSource {
        &self.source
    }

    pub fn reference_stiffness(&self) -> &SymMatrix {
        &self.reference_stiffness
    }

    /// Reference Gram operator `S^Â ⊗ Ã + S^M ⊗ Â` (μ-independent).
    pub fn gram(&self) -> &SpaceTimeOperator {
        &self.gram
    }

    pub fn cg(&self) -> &CgOptions {
        &self.cg
    }

    pub fn truth_dim(&self) -> usize {
        self.time_space.n_dof() * self.space.n_dof()
    }

    fn check_mu(&self, mu: f64) -> Result<()> {
        let slack = 1e-12 * self.mu_max.abs().max(1.0);
        if !mu.is_finite() || mu < self.mu_min - slack || mu > self.mu_max + slack {
            return Err(Error::InvalidParameter {
                mu,
                reason: format!("outside [{}, {}]", self.mu_min, self.mu_max),
            });
        }
        Ok(())
    }

    /// Spatial stiffness `Â(μ)`.
    pub fn stiffness(&self, mu: f64) -> Result<SymMatrix> {
        self.check_mu(mu)?;
        Ok(match self.kind {
            FamilyKind::ScaledLaplacian => self.reference_stiffness.scaled(mu),
            FamilyKind::DiffusionReaction => self.reference_stiffness.add_scaled(mu, &self.mass)?,
        })
    }

    /// `S(μ)` and `r(μ)`, both built with the Riesz map of `Â(μ)`.
    pub fn system(&self, mu: f64, options: OperatorOptions) -> Result<(SpaceTimeOperator, Vec<f64>)> {
        let stiffness = self.stiffness(mu)?;
        let op = SpaceTimeOperator::with_stiffness(&self.time_space, &self.space, stiffness, options).map_err(|e| {
            match e {
                Error::Factorization(reason) => Error::InvalidParameter { mu, reason },
                other => other,
            }
        })?;
        let r = assemble_rhs(&self.source, &self.time_space, &self.space, op.riesz())?;
        Ok((op, r))
    }
}

pub fn assemble_param_system(family: &ParamFamily, mu: f64) -> Result<(SpaceTimeOperator, Vec<f64>)> {
    family.system(mu, family.truth_options)
}

pub fn truth_solve(family: &ParamFamily, mu: f64) -> Result<SpaceTimeSolution> {
    let (op, r) = assemble_param_system(family, mu)?;
    op.solve(&r, &family.cg)
}

/// `count` logarithmically spaced points on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k + 1 == count {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// `count` points at the logarithmic midpoints of `count` equal sub-intervals of
/// `[lo, hi]`; disjoint from `log_spaced(lo, hi, k)` whenever `k` is even.
pub fn log_midpoints(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * (k as f64 + 0.5) / count as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// Fraction of the largest empty-basis estimator over the training set.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    pub training: Vec<f64>,
    pub tolerance: Tolerance,
    pub max_basis: usize,
    /// Overrides the family's coercivity lower bound.
    pub coercivity: Option<f64>,
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.training.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        let tol = match self.tolerance {
            Tolerance::Absolute(t) | Tolerance::Relative(t) => t,
        };
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        if self.max_basis == 0 {
            return Err(Error::InvalidArgument("max basis size must be at least 1".into()));
        }
        if let Some(c) = self.coercivity {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("coercivity bound must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Basis size after adding `mu_selected`.
    pub iter: usize,
    pub mu_selected: f64,
    /// `max_{μ ∈ S_train} Δ(W_iter, μ)`.
    pub max_estimator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyStatus {
    Converged,
    /// Maximum basis size reached with the tolerance unmet.
    MaxBasisReached,
    /// The selected snapshot was numerically dependent on the basis.
    DependentSnapshot,
}

#[derive(Debug, Clone)]
pub struct GreedyResult {
    /// Basis vectors, orthonormal in the reference W(0,T) Gram product.
    pub basis: Vec<Vec<f64>>,
    pub selected: Vec<f64>,
    pub history: Vec<IterationRecord>,
    /// `max_μ Δ(W_0, μ)` over the training set.
    pub initial_estimator: f64,
    pub tolerance: f64,
    pub coercivity: f64,
    pub status: GreedyStatus,
}

impl GreedyResult {
    pub fn converged(&self) -> bool {
        self.status == GreedyStatus::Converged
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Basis spanned by arbitrary snapshots (no greedy selection).
    pub fn from_snapshots(family: &ParamFamily, snapshots: &[Vec<f64>]) -> Result<Self> {
        let mut basis = Vec::new();
        for s in snapshots {
            if !extend_basis(&mut basis, s, family.gram())? {
                return Err(Error::DegenerateBasis("snapshot is linearly dependent on the basis".into()));
            }
        }
        Ok(Self {
            basis,
            selected: Vec::new(),
            history: Vec::new(),
            initial_estimator: f64::NAN,
            tolerance: f64::NAN,
            coercivity: family.coercivity_lower_bound(),
            status: GreedyStatus::Converged,
        })
    }
}

/// Relative threshold below which an orthogonalized snapshot counts as dependent.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-10;

/// Gram–Schmidt in the G inner product with one re-orthogonalization pass.
/// Returns `false` (basis unchanged) if `v` is numerically in the span.
fn extend_basis(basis: &mut Vec<Vec<f64>>, v: &[f64], gram: &SpaceTimeOperator) -> Result<bool> {
    let original = gram.bilinear(v, v)?.sqrt();
    if !(original > 0.0) {
        return Ok(false);
    }
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis.iter() {
            let c = gram.bilinear(b, &w)?;
            axpy(-c, b, &mut w);
        }
    }
    let norm = gram.bilinear(&w, &w)?.max(0.0).sqrt();
    if norm <= DEPENDENCE_THRESHOLD * original {
        return Ok(false);
    }
    w.iter_mut().for_each(|x| *x /= norm);
    basis.push(w);
    Ok(true)
}

/// Reduced solution `c` and its reconstruction `V c` in the truth space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    pub coefficients: Vec<f64>,
    pub reconstruction: Vec<f64>,
}

fn reduced_solve(basis: &[Vec<f64>], op: &SpaceTimeOperator, r: &[f64]) -> Result<ReducedSolution> {
    if basis.is_empty() {
        return Ok(ReducedSolution { coefficients: Vec::new(), reconstruction: vec![0.0; op.dim()] });
    }
    let n = basis.len();
    let s_basis: Vec<Vec<f64>> = basis.iter().map(|b| op.apply(b)).collect::<Result<_>>()?;
    let a = DMatrix::from_fn(n, n, |i, j| 0.5 * (dot(&basis[i], &s_basis[j]) + dot(&basis[j], &s_basis[i])));
    let rhs = DVector::from_fn(n, |i, _| dot(&basis[i], r));
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::DegenerateBasis("projected system is not positive definite".into()))?;
    let c = chol.solve(&rhs);
    let mut recon = vec![0.0; op.dim()];
    for (k, b) in basis.iter().enumerate() {
        axpy(c[k], b, &mut recon);
    }
    Ok(ReducedSolution { coefficients: c.as_slice().to_vec(), reconstruction: recon })
}

/// Solves `Vᵀ S(μ) V c = Vᵀ r(μ)`.
pub fn rb_solve(result: &GreedyResult, family: &ParamFamily, mu: f64) -> Result<ReducedSolution> {
    if result.basis.is_empty() {
        return Err(Error::DegenerateBasis("empty basis".into()));
    }
    let (op, r) = family.system(mu, OperatorOptions::with_mode(SolverMode::MatrixFree))?;
    reduced_solve(&result.basis, &op, &r)
}

/// `Δ(W_N, μ)` for an explicit basis (possibly empty).
fn estimate(basis: &[Vec<f64>], family: &ParamFamily, mu: f64, coercivity: f64) -> Result<(f64, ReducedSolution)> {
    let (op, r) = family.system(mu, OperatorOptions::with_mode(SolverMode::MatrixFree))?;
    let red = reduced_solve(basis, &op, &r)?;
    let mut residual = r;
    let s = op.apply(&red.reconstruction)?;
    axpy(-1.0, &s, &mut residual);
    let norm = residual_dual_norm(&residual, family.gram(), family.cg())?;
    Ok((norm / coercivity, red))
}

pub fn estimator(result: &GreedyResult, family: &ParamFamily, mu: f64) -> Result<f64> {
    Ok(estimate(&result.basis, family, mu, result.coercivity)?.0)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

fn sweep(basis: &[Vec<f64>], family: &ParamFamily, training: &[f64], coercivity: f64) -> Result<Vec<f64>> {
    training
        .par_iter()
        .map(|&mu| estimate(basis, family, mu, coercivity).map(|(d, _)| d))
        .collect()
}

/// Weak greedy: repeatedly add the truth snapshot at the training parameter with
/// the largest estimator until `max Δ ≤ ε_tol` or the basis is full.
pub fn greedy(family: &ParamFamily, config: &GreedyConfig) -> Result<GreedyResult> {
    config.validate()?;
    let coercivity = config.coercivity.unwrap_or_else(|| family.coercivity_lower_bound());
    let mut estimates = sweep(&[], family, &config.training, coercivity)?;
    let initial = estimates.iter().copied().fold(0.0, f64::max);
    let tolerance = match config.tolerance {
        Tolerance::Absolute(t) => t,
        Tolerance::Relative(t) => t * initial,
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut selected = Vec::new();
    let mut history = Vec::new();
    let mut status = GreedyStatus::MaxBasisReached;
    let mut next = argmax(&estimates);
    while basis.len() < config.max_basis {
        let mu = config.training[next];
        let snapshot = truth_solve(family, mu)?;
        if !extend_basis(&mut basis, snapshot.coefficients(), family.gram())? {
            status = GreedyStatus::DependentSnapshot;
            break;
        }
        selected.push(mu);
        estimates = sweep(&basis, family, &config.training, coercivity)?;
        next = argmax(&estimates);
        let max_estimator = estimates[next];
        history.push(IterationRecord { iter: basis.len(), mu_selected: mu, max_estimator });
        if max_estimator <= tolerance {
            status = GreedyStatus::Converged;
            break;
        }
    }
    Ok(GreedyResult { basis, selected, history, initial_estimator: initial, tolerance, coercivity, status })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificationRecord {
    pub mu: f64,
    pub estimator: f64,
    /// `‖y_d(μ) − y_N(μ)‖` in the reference W(0,T) Gram norm.
    pub true_error: f64,
}

impl CertificationRecord {
    pub fn certified(&self) -> bool {
        self.true_error <= self.estimator
    }
}

/// Compares estimator and true reduced error at each `mu`.
pub fn certify(result: &GreedyResult, family: &ParamFamily, mus: &[f64]) -> Result<Vec<CertificationRecord>> {
    mus.par_iter()
        .map(|&mu| {
            let (estimator, red) = estimate(&result.basis, family, mu, result.coercivity)?;
            let truth = truth_solve(family, mu)?;
            let mut e = truth.into_coefficients();
            axpy(-1.0, &red.reconstruction, &mut e);
            let true_error = family.gram().bilinear(&e, &e)?.max(0.0).sqrt();
            Ok(CertificationRecord { mu, estimator, true_error })
        })
        .collect()
}

pub const ITERATION_CSV_HEADER: &str = "iter,mu_selected,max_estimator";
pub const CERTIFICATION_CSV_HEADER: &str = "mu,estimator,true_error";

pub fn iterations_csv(result: &GreedyResult) -> String {
    let mut out = format!("{ITERATION_CSV_HEADER}\n");
    for r in &result.history {
        writeln!(out, "{},{},{}", r.iter, r.mu_selected, r.max_estimator).unwrap();
    }
    out
}

pub fn certification_csv(records: &[CertificationRecord]) -> String {
    let mut out = format!("{CERTIFICATION_CSV_HEADER}\n");
    for r in records {
        writeln!(out, "{},{},{}", r.mu, r.estimator, r.true_error).unwrap();
    }
    out
}

/// Writes `greedy_iterations.csv` and `greedy_certification.csv` into `dir`.
pub fn write_greedy_outputs(
    result: &GreedyResult,
    records: &[CertificationRecord],
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let it = dir.join("greedy_iterations.csv");
    let cert = dir.join("greedy_certification.csv");
    write_file(&it, &iterations_csv(result))?;
    write_file(&cert, &certification_csv(records))?;
    Ok((it, cert))
}
