//! The Kronecker space-time operator
//! `S = S^Â ⊗ Ã + S^M ⊗ Â + S^T ⊗ M`, its right-hand side, and the dense and
//! matrix-free solvers for `S y = r`.

mod solution;
mod source;

pub use solution::SpaceTimeSolution;
pub use source::{scalar_fn, DiracAtom, ScalarFn, SeparableSource, SourceTerm};

use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cg::{preconditioned_cg, CgOptions};
use crate::error::{check_len, Error, Result};
use crate::mesh_fe::{
    assemble_mass, assemble_stiffness, assemble_temporal, P1Space, SymMatrix, TemporalMatrices,
};
use crate::riesz::{assemble_dual_mass, dual_mass_diagonal, RieszMap};

/// Problems above this many unknowns use the matrix-free path under [`SolverMode::Auto`].
pub const AUTO_DENSE_THRESHOLD: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Materialized `S` with a dense Cholesky solve.
    Dense,
    /// Kronecker action with Jacobi-preconditioned CG.
    MatrixFree,
    /// Dense up to [`AUTO_DENSE_THRESHOLD`] unknowns, matrix-free above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    pub mode: SolverMode,
    /// Refuse to materialize a dense `S` above this many unknowns.
    pub dense_limit: usize,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self { mode: SolverMode::Auto, dense_limit: 8_000 }
    }
}

impl OperatorOptions {
    pub fn with_mode(mode: SolverMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

/// Which Kronecker terms an operator carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Terms {
    /// `S^Â ⊗ Ã + S^M ⊗ Â + S^T ⊗ M`
    Full,
    /// `S^Â ⊗ Ã + S^M ⊗ Â`, the discrete W(0,T) inner product.
    Gram,
}

/// Space-time system operator, time-major ordering `y = (y¹, …, y^M)`.
#[derive(Debug, Clone)]
pub struct SpaceTimeOperator {
    time_space: P1Space,
    space: P1Space,
    temporal: TemporalMatrices,
    stiffness: SymMatrix,
    mass: SymMatrix,
    riesz: Arc<RieszMap>,
    terms: Terms,
    dense: Option<Arc<DMatrix<f64>>>,
    dense_factor: Arc<OnceLock<Option<Cholesky<f64, Dyn>>>>,
    diagonal: Arc<OnceLock<Vec<f64>>>,
}

/// Operator with the plain V inner product `∫ φ_i' φ_j'`.
pub fn assemble_operator(time_space: &P1Space, space: &P1Space, options: OperatorOptions) -> Result<SpaceTimeOperator> {
    SpaceTimeOperator::assemble(time_space, space, options)
}

impl SpaceTimeOperator {
    pub fn assemble(time_space: &P1Space, space: &P1Space, options: OperatorOptions) -> Result<Self> {
        Self::with_stiffness(time_space, space, assemble_stiffness(space), options)
    }

    /// Operator whose V inner product (and hence Riesz map) is given by `stiffness`.
    pub fn with_stiffness(
        time_space: &P1Space,
        space: &P1Space,
        stiffness: SymMatrix,
        options: OperatorOptions,
    ) -> Result<Self> {
        check_len(space.n_dof(), stiffness.dim())?;
        let riesz = Arc::new(RieszMap::new(&stiffness)?);
        Self::from_parts(
            time_space.clone(),
            space.clone(),
            assemble_temporal(time_space)?,
            stiffness,
            assemble_mass(space),
            riesz,
            Terms::Full,
            options,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        time_space: P1Space,
        space: P1Space,
        temporal: TemporalMatrices,
        stiffness: SymMatrix,
        mass: SymMatrix,
        riesz: Arc<RieszMap>,
        terms: Terms,
        options: OperatorOptions,
    ) -> Result<Self> {
        let dofs = temporal.dim() * space.n_dof();
        let dense_mode = match options.mode {
            SolverMode::Dense => {
                if dofs > options.dense_limit {
                    return Err(Error::InvalidArgument(format!(
                        "dense space-time system with {dofs} unknowns exceeds the limit of {}",
                        options.dense_limit
                    )));
                }
                true
            }
            SolverMode::MatrixFree => false,
            SolverMode::Auto => dofs <= AUTO_DENSE_THRESHOLD.min(options.dense_limit),
        };
        let mut op = Self {
            time_space,
            space,
            temporal,
            stiffness,
            mass,
            riesz,
            terms,
            dense: None,
            dense_factor: Arc::new(OnceLock::new()),
            diagonal: Arc::new(OnceLock::new()),
        };
        if dense_mode {
            op.dense = Some(Arc::new(op.materialize()?));
        }
        Ok(op)
    }

    /// The discrete W(0,T) Gram operator `S^Â ⊗ Ã + S^M ⊗ Â` on the same spaces.
    pub fn gram(&self, options: OperatorOptions) -> Result<Self> {
        Self::from_parts(
            self.time_space.clone(),
            self.space.clone(),
            self.temporal.clone(),
            self.stiffness.clone(),
            self.mass.clone(),
            self.riesz.clone(),
            Terms::Gram,
            options,
        )
    }

    pub fn dim(&self) -> usize {
        self.n_time() * self.n_space()
    }

    pub fn n_time(&self) -> usize {
        self.temporal.dim()
    }

    pub fn n_space(&self) -> usize {
        self.space.n_dof()
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn includes_terminal(&self) -> bool {
        self.terms == Terms::Full
    }

    pub fn time_space(&self) -> &P1Space {
        &self.time_space
    }

    pub fn space(&self) -> &P1Space {
        &self.space
    }

    pub fn temporal(&self) -> &TemporalMatrices {
        &self.temporal
    }

    pub fn stiffness(&self) -> &SymMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &SymMatrix {
        &self.mass
    }

    pub fn riesz(&self) -> &RieszMap {
        &self.riesz
    }

    /// Dense matrix, built from the Kronecker blocks.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match &self.dense {
            Some(d) => Ok((**d).clone()),
            None => self.materialize(),
        }
    }

    fn materialize(&self) -> Result<DMatrix<f64>> {
        let (mt, n) = (self.n_time(), self.n_space());
        let dual = assemble_dual_mass(&self.riesz, &self.mass)?.to_dense();
        let stiff = self.stiffness.to_dense();
        let mass = self.mass.to_dense();
        let mut s = DMatrix::zeros(mt * n, mt * n);
        for i in 0..mt {
            for j in 0..mt {
                let (ca, cm) = (self.temporal.stiffness.get(i, j), self.temporal.mass.get(i, j));
                let ct = if self.terms == Terms::Full { self.temporal.terminal.get(i, j) } else { 0.0 };
                if ca == 0.0 && cm == 0.0 && ct == 0.0 {
                    continue;
                }
                let block = &dual * ca + &stiff * cm + &mass * ct;
                s.view_mut((i * n, j * n), (n, n)).copy_from(&block);
            }
        }
        Ok(s)
    }

    /// `y ↦ S y`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), y.len())?;
        let mut out = vec![0.0; y.len()];
        self.apply_into(y, &mut out);
        Ok(out)
    }

    /// `out += S y` through the Kronecker structure; `Ã` acts as M-multiply, Â-solve, M-multiply.
    pub fn apply_matrix_free(&self, y: &[f64], out: &mut [f64]) {
        let (mt, n) = (self.n_time(), self.n_space());
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for i in 0..mt {
            u.iter_mut().for_each(|x| *x = 0.0);
            v.iter_mut().for_each(|x| *x = 0.0);
            w.iter_mut().for_each(|x| *x = 0.0);
            let mut any_w = false;
            for j in coupled(&self.temporal.stiffness, &self.temporal.mass, i, mt) {
                let yj = &y[j * n..(j + 1) * n];
                let (ca, cm) = (self.temporal.stiffness.get(i, j), self.temporal.mass.get(i, j));
                for k in 0..n {
                    u[k] += ca * yj[k];
                    v[k] += cm * yj[k];
                }
            }
            if self.terms == Terms::Full {
                if let SymMatrix::RankOne { vector } = &self.temporal.terminal {
                    if vector[i] != 0.0 {
                        for (j, &vj) in vector.iter().enumerate().filter(|(_, &vj)| vj != 0.0) {
                            let c = vector[i] * vj;
                            for (wk, yk) in w.iter_mut().zip(&y[j * n..(j + 1) * n]) {
                                *wk += c * yk;
                            }
                        }
                        any_w = true;
                    }
                } else {
                    for j in 0..mt {
                        let c = self.temporal.terminal.get(i, j);
                        if c != 0.0 {
                            for (wk, yk) in w.iter_mut().zip(&y[j * n..(j + 1) * n]) {
                                *wk += c * yk;
                            }
                            any_w = true;
                        }
                    }
                }
            }
            let oi = &mut out[i * n..(i + 1) * n];
            // Ã u = M Â⁻¹ M u
            tmp.iter_mut().for_each(|x| *x = 0.0);
            self.mass.mul_add(1.0, &u, &mut tmp);
            self.riesz.lift_in_place(&mut tmp);
            self.mass.mul_add(1.0, &tmp, oi);
            self.stiffness.mul_add(1.0, &v, oi);
            if any_w {
                self.mass.mul_add(1.0, &w, oi);
            }
        }
    }

    fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        match &self.dense {
            Some(d) => {
                let r = &**d * DVector::from_column_slice(y);
                for (o, v) in out.iter_mut().zip(r.iter()) {
                    *o += v;
                }
            }
            None => self.apply_matrix_free(y, out),
        }
    }

    /// Diagonal of `S`, read off the Kronecker factors.
    pub fn diagonal(&self) -> Result<&[f64]> {
        if let Some(d) = self.diagonal.get() {
            return Ok(d);
        }
        let dual_diag = dual_mass_diagonal(&self.riesz, &self.mass)?;
        let stiff = self.stiffness.diagonal();
        let mass = self.mass.diagonal();
        let (mt, n) = (self.n_time(), self.n_space());
        let mut d = Vec::with_capacity(mt * n);
        for i in 0..mt {
            let (ca, cm) = (self.temporal.stiffness.get(i, i), self.temporal.mass.get(i, i));
            let ct = if self.terms == Terms::Full { self.temporal.terminal.get(i, i) } else { 0.0 };
            for k in 0..n {
                d.push(ca * dual_diag[k] + cm * stiff[k] + ct * mass[k]);
            }
        }
        Ok(self.diagonal.get_or_init(|| d))
    }

    /// Solves `S y = r`: Cholesky in dense mode, Jacobi-preconditioned CG otherwise.
    pub fn solve_vec(&self, r: &[f64], cg: &CgOptions) -> Result<Vec<f64>> {
        check_len(self.dim(), r.len())?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("right-hand side contains non-finite entries".into()));
        }
        match &self.dense {
            Some(d) => {
                let chol = self
                    .dense_factor
                    .get_or_init(|| Cholesky::new((**d).clone()))
                    .as_ref()
                    .ok_or_else(|| Error::Factorization("space-time matrix is not positive definite".into()))?;
                Ok(chol.solve(&DVector::from_column_slice(r)).as_slice().to_vec())
            }
            None => {
                let diag = self.diagonal()?;
                let out = preconditioned_cg(|x, y| self.apply_matrix_free(x, y), diag, r, cg)?;
                Ok(out.solution)
            }
        }
    }

    pub fn solve(&self, r: &[f64], cg: &CgOptions) -> Result<SpaceTimeSolution> {
        let y = self.solve_vec(r, cg)?;
        SpaceTimeSolution::new(y, self.time_space.clone(), self.space.clone())
    }

    /// `xᵀ S y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let sy = self.apply(y)?;
        check_len(sy.len(), x.len())?;
        Ok(sy.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// The three Kronecker quadratic forms `(yᵀ(S^Â⊗Ã)y, yᵀ(S^M⊗Â)y, yᵀ(S^T⊗M)y)`.
    pub fn energy_parts(&self, y: &[f64]) -> Result<EnergyParts> {
        check_len(self.dim(), y.len())?;
        let (mt, n) = (self.n_time(), self.n_space());
        let block = |j: usize| &y[j * n..(j + 1) * n];
        let mut parts = EnergyParts::default();
        // Mx for every block, reused by the dual and terminal parts
        let my: Vec<Vec<f64>> = (0..mt).map(|j| self.mass.mul_vec(block(j))).collect::<Result<_>>()?;
        let lifted: Vec<Vec<f64>> = my.iter().map(|v| self.riesz.lift(v)).collect::<Result<_>>()?;
        let ay: Vec<Vec<f64>> = (0..mt).map(|j| self.stiffness.mul_vec(block(j))).collect::<Result<_>>()?;
        for i in 0..mt {
            for j in 0..mt {
                let (ca, cm, ct) = (
                    self.temporal.stiffness.get(i, j),
                    self.temporal.mass.get(i, j),
                    self.temporal.terminal.get(i, j),
                );
                if ca != 0.0 {
                    parts.dual += ca * crate::mesh_fe::dot(&my[i], &lifted[j]);
                }
                if cm != 0.0 {
                    parts.spatial += cm * crate::mesh_fe::dot(block(i), &ay[j]);
                }
                if ct != 0.0 {
                    parts.terminal += ct * crate::mesh_fe::dot(block(i), &my[j]);
                }
            }
        }
        Ok(parts)
    }
}

/// Split of the space-time energy into its three Kronecker contributions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyParts {
    /// `∫ ‖y_t‖²_{V*}` (discrete dual norm)
    pub dual: f64,
    /// `∫ ‖y‖²_V`
    pub spatial: f64,
    /// `‖y(T)‖²_H`
    pub terminal: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.dual + self.spatial + self.terminal
    }

    /// Squared discrete W(0,T) norm.
    pub fn w_norm_sq(&self) -> f64 {
        self.dual + self.spatial
    }
}

/// Time indices `j` with a possibly nonzero temporal coupling to `i`.
fn coupled(a: &SymMatrix, b: &SymMatrix, i: usize, mt: usize) -> std::ops::Range<usize> {
    let banded = |m: &SymMatrix| matches!(m, SymMatrix::Tridiagonal { .. } | SymMatrix::Diagonal(_));
    if banded(a) && banded(b) {
        i.saturating_sub(1)..(i + 2).min(mt)
    } else {
        0..mt
    }
}

/// Load vector `⟨f^x, φ_n⟩`: quadrature of the smooth part plus point evaluations of the atoms.
pub fn spatial_load(term: &SourceTerm, space: &P1Space) -> Vec<f64> {
    let rule = crate::mesh_fe::QuadRule::default_assembly();
    let mut load = match &term.spatial {
        Some(f) => space.load_vector(|x| f(x), &term.spatial_breakpoints, &rule),
        None => vec![0.0; space.n_dof()],
    };
    for atom in &term.atoms {
        for (d, v) in space.basis_values(atom.location) {
            load[d] += atom.weight * v;
        }
    }
    load
}

/// Right-hand side `r_{n,m} = χ_m(0)(y₀, φ_n)_H + (f^x, φ_n)_{V*} ∫χ̇_m f^t + ⟨f^x, φ_n⟩ ∫χ_m f^t`,
/// summed over the separable terms, space index fastest.
pub fn assemble_rhs(source: &SeparableSource, time_space: &P1Space, space: &P1Space, riesz: &RieszMap) -> Result<Vec<f64>> {
    check_len(space.n_dof(), riesz.n_dof())?;
    source.validate(space.grid().a(), space.grid().b())?;
    let rule = crate::mesh_fe::QuadRule::default_assembly();
    let (mt, n) = (time_space.n_dof(), space.n_dof());
    let mass = assemble_mass(space);
    let mut r = vec![0.0; mt * n];

    let y0 = &source.y0;
    let y0_load = space.load_vector(|x| y0(x), &source.y0_breakpoints, &rule);
    for (m, chi0) in time_space.basis_values(time_space.grid().a()) {
        crate::mesh_fe::axpy(chi0, &y0_load, &mut r[m * n..(m + 1) * n]);
    }

    for term in &source.terms {
        let ft = &term.temporal;
        let t_int = time_space.load_vector(|t| ft(t), &term.temporal_breakpoints, &rule);
        let t_dot = time_space.derivative_load_vector(|t| ft(t), &term.temporal_breakpoints, &rule);
        let duality = spatial_load(term, space);
        // (f^x, φ_n)_{V*} = (R_N R f^x, φ_n)_H = (M Â⁻¹ F)_n
        let lifted = riesz.lift(&duality)?;
        let dual_inner = mass.mul_vec(&lifted)?;
        for m in 0..mt {
            let block = &mut r[m * n..(m + 1) * n];
            crate::mesh_fe::axpy(t_dot[m], &dual_inner, block);
            crate::mesh_fe::axpy(t_int[m], &duality, block);
        }
    }
    Ok(r)
}

/// Assembles and solves the space-time problem for `source`.
pub fn solve_problem(
    time_space: &P1Space,
    space: &P1Space,
    source: &SeparableSource,
    options: OperatorOptions,
    cg: &CgOptions,
) -> Result<(SpaceTimeOperator, SpaceTimeSolution)> {
    let op = SpaceTimeOperator::assemble(time_space, space, options)?;
    let r = assemble_rhs(source, time_space, space, op.riesz())?;
    let sol = op.solve(&r, cg)?;
    Ok((op, sol))
}

#[cfg(test)]
mod tests;
