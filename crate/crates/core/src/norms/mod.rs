//! Error norms against exact solutions, the residual dual norm, and the
//! a-posteriori bound check.

mod manufactured;

pub use manufactured::{AnalyticalSolution, FieldFn};

use crate::cg::CgOptions;
use crate::error::{check_len, Error, Result};
use crate::mesh_fe::{assemble_mass, dot, QuadRule};
use crate::riesz::RieszMap;
use crate::spacetime_system::{SpaceTimeOperator, SpaceTimeSolution};

/// `(‖y_d − y‖_{C⁰(L²)}, ‖y_d − y‖_{L²(H¹)}, ‖∂_t y_d − y_t‖_{L²(H⁻¹)})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTriple {
    pub c0_l2: f64,
    pub l2_h1: f64,
    pub l2_hm1_dt: f64,
}

impl ErrorTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.c0_l2, self.l2_h1, self.l2_hm1_dt]
    }
}

fn spatial_l2_sq(sol: &SpaceTimeSolution, coeffs: &[f64], t: f64, exact: &AnalyticalSolution, rule: &QuadRule) -> f64 {
    let space = sol.space();
    space
        .grid()
        .panels(&exact.spatial_breakpoints)
        .iter()
        .map(|p| {
            rule.mapped(p.lo, p.hi)
                .map(|(x, w)| {
                    let e = space.eval_on_cell(coeffs, p.cell, x).0 - (exact.y)(t, x);
                    w * e * e
                })
                .sum::<f64>()
        })
        .sum()
}

/// Maximum over time nodes and per-panel Gauss points of the spatial L² error.
pub fn error_c0_l2(sol: &SpaceTimeSolution, exact: &AnalyticalSolution) -> f64 {
    let rule = QuadRule::default_error();
    let tgrid = sol.time_space().grid();
    let mut samples: Vec<(usize, f64)> = tgrid.nodes().iter().map(|&t| (tgrid.locate(t), t)).collect();
    for p in tgrid.panels(&exact.temporal_breakpoints) {
        samples.extend(rule.mapped(p.lo, p.hi).map(|(t, _)| (p.cell, t)));
    }
    samples
        .into_iter()
        .map(|(cell, t)| {
            let (c, _) = sol.time_slice(cell, t);
            spatial_l2_sq(sol, &c, t, exact, &rule)
        })
        .fold(0.0f64, f64::max)
        .sqrt()
}

/// `(∫₀ᵀ ‖∂_x (y_d − y)‖²_{L²} dt)^{1/2}`.
pub fn error_l2_h1(sol: &SpaceTimeSolution, exact: &AnalyticalSolution) -> f64 {
    let rule = QuadRule::default_error();
    let space = sol.space();
    let xpanels = space.grid().panels(&exact.spatial_breakpoints);
    let mut acc = 0.0;
    for p in sol.time_space().grid().panels(&exact.temporal_breakpoints) {
        for (t, wt) in rule.mapped(p.lo, p.hi) {
            let (c, _) = sol.time_slice(p.cell, t);
            let mut inner = 0.0;
            for q in &xpanels {
                for (x, wx) in rule.mapped(q.lo, q.hi) {
                    let e = space.eval_on_cell(&c, q.cell, x).1 - (exact.y_x)(t, x);
                    inner += wx * e * e;
                }
            }
            acc += wt * inner;
        }
    }
    acc.sqrt()
}

/// `(∫₀ᵀ ‖∂_t y_d − y_t‖²_{V*} dt)^{1/2}` in the discrete dual norm of `riesz`.
pub fn error_l2_hm1_dt(sol: &SpaceTimeSolution, exact: &AnalyticalSolution, riesz: &RieszMap) -> Result<f64> {
    check_len(sol.space().n_dof(), riesz.n_dof())?;
    let rule = QuadRule::default_error();
    let space = sol.space();
    let mass = assemble_mass(space);
    let mut acc = 0.0;
    for p in sol.time_space().grid().panels(&exact.temporal_breakpoints) {
        for (t, wt) in rule.mapped(p.lo, p.hi) {
            let (_, rate) = sol.time_slice(p.cell, t);
            let mut load = mass.mul_vec(&rate)?;
            let yt = space.load_vector(|x| (exact.y_t)(t, x), &exact.spatial_breakpoints, &rule);
            for (l, e) in load.iter_mut().zip(&yt) {
                *l -= e;
            }
            acc += wt * riesz.dual_norm_sq(&load)?;
        }
    }
    Ok(acc.sqrt())
}

/// `‖y_d(T) − y(T)‖_{L²}`.
pub fn error_terminal_l2(sol: &SpaceTimeSolution, exact: &AnalyticalSolution) -> f64 {
    let rule = QuadRule::default_error();
    let c = sol.terminal_slice();
    spatial_l2_sq(sol, &c, sol.time_space().grid().b(), exact, &rule).sqrt()
}

pub fn error_triple(sol: &SpaceTimeSolution, exact: &AnalyticalSolution, riesz: &RieszMap) -> Result<ErrorTriple> {
    Ok(ErrorTriple {
        c0_l2: error_c0_l2(sol, exact),
        l2_h1: error_l2_h1(sol, exact),
        l2_hm1_dt: error_l2_hm1_dt(sol, exact, riesz)?,
    })
}

/// `√(rᵀ G⁻¹ r)` for the Gram operator `gram`, normally the W(0,T) product
/// `S^Â ⊗ Ã + S^M ⊗ Â` (see [`SpaceTimeOperator::gram`]).
pub fn residual_dual_norm(r: &[f64], gram: &SpaceTimeOperator, cg: &CgOptions) -> Result<f64> {
    check_len(gram.dim(), r.len())?;
    if r.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let z = gram.solve_vec(r, cg)?;
    Ok(dot(r, &z).max(0.0).sqrt())
}

/// Both sides of `‖e‖²_W + ‖e(T)‖²_H ≤ ‖r‖_{W*} ‖e‖_W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AposterioriReport {
    pub error_w_norm: f64,
    pub error_terminal: f64,
    pub residual_dual_norm: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl AposterioriReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack * self.rhs.abs()
    }
}

/// Evaluates the a-posteriori bound for an approximation `approx` of the
/// solution `truth` of `S y = rhs` (all vectors in the space of `op`).
pub fn aposteriori_bound(
    op: &SpaceTimeOperator,
    gram: &SpaceTimeOperator,
    rhs: &[f64],
    truth: &[f64],
    approx: &[f64],
    cg: &CgOptions,
) -> Result<AposterioriReport> {
    check_len(op.dim(), gram.dim())?;
    check_len(op.dim(), truth.len())?;
    check_len(op.dim(), approx.len())?;
    if !op.includes_terminal() || gram.includes_terminal() {
        return Err(Error::InvalidArgument("expected the full operator and the W(0,T) Gram operator".into()));
    }
    let e: Vec<f64> = truth.iter().zip(approx).map(|(a, b)| a - b).collect();
    let mut residual = rhs.to_vec();
    let s_approx = op.apply(approx)?;
    for (r, s) in residual.iter_mut().zip(&s_approx) {
        *r -= s;
    }
    let e_sol = SpaceTimeSolution::new(e.clone(), op.time_space().clone(), op.space().clone())?;
    let e_terminal_sq = op.mass().quad_form(&e_sol.terminal_slice())?;
    let e_w_sq = gram.bilinear(&e, &e)?;
    let res_norm = residual_dual_norm(&residual, gram, cg)?;
    Ok(AposterioriReport {
        error_w_norm: e_w_sq.sqrt(),
        error_terminal: e_terminal_sq.sqrt(),
        residual_dual_norm: res_norm,
        lhs: e_w_sq + e_terminal_sq,
        rhs: res_norm * e_w_sq.sqrt(),
    })
}
