//! Jacobi-preconditioned conjugate gradients for SPD operators given by their action.

use crate::error::{check_len, Error, Result};
use crate::mesh_fe::{axpy, dot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop once `‖b − A x‖₂ ≤ tol · ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Relative residual norms, one per iteration plus the initial one.
    pub history: Vec<f64>,
}

/// Solves `A x = b` from a zero initial guess; `diag` is the diagonal of `A`.
pub fn preconditioned_cg<A>(mut apply: A, diag: &[f64], b: &[f64], opts: &CgOptions) -> Result<CgOutcome>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    check_len(n, diag.len())?;
    if let Some(d) = diag.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!("Jacobi preconditioner needs a positive diagonal, found {d}")));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();

    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome { solution: x, iterations: 0, history: vec![0.0] });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];

    for it in 1..=opts.max_iter {
        ap.iter_mut().for_each(|v| *v = 0.0);
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Factorization(format!(
                "operator is not positive definite along a search direction (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = dot(&r, &r).sqrt() / b_norm;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(CgOutcome { solution: x, iterations: it, history });
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::ConvergenceFailure { iterations: opts.max_iter, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fe::SymMatrix;

    #[test]
    fn solves_small_spd_system() {
        let a = SymMatrix::Tridiagonal { diag: vec![4.0, 5.0, 6.0, 7.0], off: vec![-1.0, 2.0, -0.5] };
        let b = [1.0, -2.0, 0.5, 3.0];
        let out = preconditioned_cg(|x, y| a.mul_add(1.0, x, y), &a.diagonal(), &b, &CgOptions::default()).unwrap();
        let res = a.mul_vec(&out.solution).unwrap();
        for (p, q) in res.iter().zip(&b) {
            assert!((p - q).abs() < 1e-9);
        }
        assert!(out.iterations <= 4 + 1);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = SymMatrix::Diagonal(vec![1.0, 2.0]);
        let out = preconditioned_cg(|x, y| a.mul_add(1.0, x, y), &a.diagonal(), &[0.0, 0.0], &CgOptions::default()).unwrap();
        assert_eq!(out.solution, vec![0.0, 0.0]);
    }

    #[test]
    fn budget_exhaustion_reports_history() {
        let n = 50;
        let a = SymMatrix::Tridiagonal { diag: vec![2.0; n], off: vec![-1.0; n - 1] };
        let b = vec![1.0; n];
        let opts = CgOptions { tol: 1e-14, max_iter: 3 };
        match preconditioned_cg(|x, y| a.mul_add(1.0, x, y), &a.diagonal(), &b, &opts) {
            Err(Error::ConvergenceFailure { iterations, history }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
