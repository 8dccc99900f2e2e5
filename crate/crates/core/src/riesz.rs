//! Discrete Riesz lift with respect to the V inner product.
//!
//! The continuous lift is replaced by its Ritz projection onto the spatial FE
//! space, so every dual norm computed here is the discrete one `Fᵀ Â⁻¹ G`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::mesh_fe::{dot, SymMatrix};

#[derive(Debug, Clone)]
enum Factor {
    /// `Â = L D Lᵀ` with unit lower bidiagonal `L` (sub-diagonal in `lower`).
    Tridiagonal { lower: Vec<f64>, pivots: Vec<f64> },
    Dense(Cholesky<f64, Dyn>),
}

/// Factorization of the spatial stiffness `Â`, reused for every lift.
///
/// Immutable after construction; concurrent lifts share the factor read-only.
#[derive(Debug, Clone)]
pub struct RieszMap {
    factor: Factor,
    n_dof: usize,
}

pub fn build_riesz_map(stiffness: &SymMatrix) -> Result<RieszMap> {
    RieszMap::new(stiffness)
}

pub fn riesz_lift(map: &RieszMap, load: &[f64]) -> Result<Vec<f64>> {
    map.lift(load)
}

pub fn dual_inner(map: &RieszMap, f: &[f64], g: &[f64]) -> Result<f64> {
    map.dual_inner(f, g)
}

/// Dense `Ã = M Â⁻¹ M`.
pub fn assemble_dual_mass(map: &RieszMap, mass: &SymMatrix) -> Result<SymMatrix> {
    check_len(map.n_dof(), mass.dim())?;
    let n = map.n_dof();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = mass.mul_vec(&e)?;
        e[j] = 0.0;
        let lifted = map.lift(&col)?;
        let mcol = mass.mul_vec(&lifted)?;
        out.set_column(j, &DVector::from_vec(mcol));
    }
    // symmetrize away the rounding of the solves
    let sym = (&out + out.transpose()) * 0.5;
    Ok(SymMatrix::Dense(sym))
}

/// Diagonal of `Ã = M Â⁻¹ M` without forming `Ã`.
pub fn dual_mass_diagonal(map: &RieszMap, mass: &SymMatrix) -> Result<Vec<f64>> {
    check_len(map.n_dof(), mass.dim())?;
    let n = map.n_dof();
    let mut e = vec![0.0; n];
    let mut diag = Vec::with_capacity(n);
    for j in 0..n {
        e[j] = 1.0;
        let col = mass.mul_vec(&e)?;
        e[j] = 0.0;
        diag.push(map.dual_inner(&col, &col)?);
    }
    Ok(diag)
}

impl RieszMap {
    pub fn new(stiffness: &SymMatrix) -> Result<Self> {
        let n_dof = stiffness.dim();
        if n_dof == 0 {
            return Err(Error::Factorization("empty stiffness matrix".into()));
        }
        let factor = match stiffness {
            SymMatrix::Tridiagonal { diag, off } => {
                let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
                let tiny = scale * 1e-14;
                let mut pivots = Vec::with_capacity(n_dof);
                let mut lower = Vec::with_capacity(n_dof.saturating_sub(1));
                pivots.push(diag[0]);
                for i in 1..n_dof {
                    let l = off[i - 1] / pivots[i - 1];
                    lower.push(l);
                    pivots.push(diag[i] - l * off[i - 1]);
                }
                if let Some((i, p)) = pivots.iter().enumerate().find(|(_, &p)| !(p > tiny)) {
                    return Err(Error::Factorization(format!(
                        "stiffness is not positive definite (pivot {i} = {p:e})"
                    )));
                }
                Factor::Tridiagonal { lower, pivots }
            }
            other => {
                let dense = other.to_dense();
                let chol = Cholesky::new(dense).ok_or_else(|| {
                    Error::Factorization("stiffness is not positive definite".into())
                })?;
                Factor::Dense(chol)
            }
        };
        Ok(Self { factor, n_dof })
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    /// Coefficients `c` of the discrete Riesz representer, `Â c = load`.
    pub fn lift(&self, load: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_dof, load.len())?;
        let mut out = load.to_vec();
        self.lift_in_place(&mut out);
        Ok(out)
    }

    /// Overwrites `x` with `Â⁻¹ x`. Length is not checked.
    pub fn lift_in_place(&self, x: &mut [f64]) {
        match &self.factor {
            Factor::Tridiagonal { lower, pivots } => {
                let n = x.len();
                for i in 1..n {
                    x[i] -= lower[i - 1] * x[i - 1];
                }
                for (xi, p) in x.iter_mut().zip(pivots) {
                    *xi /= p;
                }
                for i in (0..n.saturating_sub(1)).rev() {
                    x[i] -= lower[i] * x[i + 1];
                }
            }
            Factor::Dense(chol) => {
                let mut v = DVector::from_column_slice(x);
                chol.solve_mut(&mut v);
                x.copy_from_slice(v.as_slice());
            }
        }
    }

    /// `Fᵀ Â⁻¹ G`.
    pub fn dual_inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        check_len(self.n_dof, g.len())?;
        let lifted = self.lift(f)?;
        Ok(dot(&lifted, g))
    }

    pub fn dual_norm_sq(&self, f: &[f64]) -> Result<f64> {
        self.dual_inner(f, f)
    }
}
