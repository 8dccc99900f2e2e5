use super::*;
use crate::mesh_fe::{uniform_grid, Boundary};
use crate::norms::AnalyticalSolution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spaces(m: usize, n: usize) -> (P1Space, P1Space) {
    (
        P1Space::new(uniform_grid(0.0, 1.0, m).unwrap(), Boundary::Free).unwrap(),
        P1Space::new(uniform_grid(0.0, 1.0, n).unwrap(), Boundary::DirichletZero).unwrap(),
    )
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    num / den
}

#[test]
fn two_by_two_instance() {
    let (t, x) = spaces(2, 3);
    let op = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::Dense)).unwrap();
    let s = op.to_dense().unwrap();
    let expected = [
        [1.0 / 36.0 + 4.0 / 3.0, -1.0 / 36.0 + 2.0 / 3.0],
        [-1.0 / 36.0 + 2.0 / 3.0, 1.0 / 36.0 + 4.0 / 3.0 + 1.0 / 3.0],
    ];
    for i in 0..2 {
        for j in 0..2 {
            assert!((s[(i, j)] - expected[i][j]).abs() < 1e-14);
        }
    }
    let free = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::MatrixFree)).unwrap();
    let r = [0.7, -0.2];
    let yd = op.solve_vec(&r, &CgOptions::default()).unwrap();
    let ym = free.solve_vec(&r, &CgOptions::default()).unwrap();
    assert!(rel_diff(&ym, &yd) < 1e-10);
}

#[test]
fn modes_agree_on_basis_vectors() {
    let (t, x) = spaces(5, 6);
    let dense = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::Dense)).unwrap();
    let free = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::MatrixFree)).unwrap();
    assert!(dense.is_dense() && !free.is_dense());
    let n = dense.dim();
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        let a = dense.apply(&e).unwrap();
        let b = free.apply(&e).unwrap();
        assert!(rel_diff(&b, &a) < 1e-12, "column {k}");
        e[k] = 0.0;
    }
}

#[test]
fn zero_input_and_symmetry() {
    let (t, x) = spaces(7, 9);
    let op = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::MatrixFree)).unwrap();
    assert!(op.apply(&vec![0.0; op.dim()]).unwrap().iter().all(|&v| v == 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (a, b) = (random_vec(&mut rng, op.dim()), random_vec(&mut rng, op.dim()));
        let (ab, ba) = (op.bilinear(&a, &b).unwrap(), op.bilinear(&b, &a).unwrap());
        assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(ba.abs()).max(1.0));
        assert!(op.bilinear(&a, &a).unwrap() > 0.0);
    }
    assert!(op.apply(&[1.0]).is_err());
}

#[test]
fn dense_is_spd_and_order_invariant() {
    let (t, x) = spaces(6, 7);
    let op = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::Dense)).unwrap();
    let s = op.to_dense().unwrap();
    assert!((&s - s.transpose()).amax() <= 1e-14 * s.amax());
    assert!(s.clone().cholesky().is_some());

    let temporal = op.temporal();
    let dual = assemble_dual_mass(op.riesz(), op.mass()).unwrap().to_dense();
    let terms = [
        temporal.stiffness.to_dense().kronecker(&dual),
        temporal.mass.to_dense().kronecker(&op.stiffness().to_dense()),
        temporal.terminal.to_dense().kronecker(&op.mass().to_dense()),
    ];
    for order in [[0, 1, 2], [2, 1, 0], [1, 2, 0]] {
        let mut acc = DMatrix::zeros(s.nrows(), s.ncols());
        for k in order {
            acc += &terms[k];
        }
        assert!((&acc - &s).amax() <= 1e-13 * s.amax());
    }
}

#[test]
fn dense_size_guard() {
    let (t, x) = spaces(20, 20);
    let opts = OperatorOptions { mode: SolverMode::Dense, dense_limit: 100 };
    assert!(matches!(assemble_operator(&t, &x, opts), Err(Error::InvalidArgument(_))));
    let auto = assemble_operator(&t, &x, OperatorOptions { mode: SolverMode::Auto, dense_limit: 100 }).unwrap();
    assert!(!auto.is_dense());
}

#[test]
fn jacobi_diagonal_matches_dense() {
    let (t, x) = spaces(5, 8);
    let op = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::Dense)).unwrap();
    let s = op.to_dense().unwrap();
    for (k, d) in op.diagonal().unwrap().iter().enumerate() {
        assert!((d - s[(k, k)]).abs() < 1e-13 * s[(k, k)]);
    }
}

#[test]
fn zero_data_gives_zero_rhs_and_solution() {
    let (t, x) = spaces(5, 5);
    let op = assemble_operator(&t, &x, OperatorOptions::default()).unwrap();
    let r = assemble_rhs(&SeparableSource::zero(), &t, &x, op.riesz()).unwrap();
    assert!(r.iter().all(|&v| v == 0.0));
    let y = op.solve(&r, &CgOptions::default()).unwrap();
    assert!(y.coefficients().iter().all(|&v| v == 0.0));
}

#[test]
fn atom_load_is_hat_value() {
    let (_, x) = spaces(2, 5);
    let term = SourceTerm::atoms_only(scalar_fn(|_| 1.0), vec![DiracAtom { location: 0.5, weight: 2.0 }]);
    assert_eq!(spatial_load(&term, &x), vec![0.0, 2.0, 0.0]);
}

#[test]
fn boundary_atom_is_rejected() {
    let (t, x) = spaces(3, 5);
    let riesz = RieszMap::new(&assemble_stiffness(&x)).unwrap();
    let src = SeparableSource::new(
        vec![SourceTerm::atoms_only(scalar_fn(|_| 1.0), vec![DiracAtom { location: 1.0, weight: 1.0 }])],
        scalar_fn(|_| 0.0),
    );
    assert!(matches!(assemble_rhs(&src, &t, &x, &riesz), Err(Error::InvalidArgument(_))));
}

/// `l(χ_m φ_n) = ∫ ⟨f(t), χ̇_m φ_n + χ_m A φ_n⟩_{V*} dt + χ_m(0)(y₀, φ_n)`, with `f(t, ·)`
/// loaded pointwise at every time quadrature node (no separability used).
fn rhs_oracle(exact: &AnalyticalSolution, f: &dyn Fn(f64, f64) -> f64, t: &P1Space, x: &P1Space) -> Vec<f64> {
    let rule = crate::mesh_fe::QuadRule::gauss(5).unwrap();
    let a = assemble_stiffness(x);
    let m = assemble_mass(x);
    let riesz = RieszMap::new(&a).unwrap();
    let n = x.n_dof();
    let mut r = vec![0.0; t.n_dof() * n];
    for p in t.grid().panels(&exact.temporal_breakpoints) {
        let (lo, hi) = t.grid().cell(p.cell);
        let tau = hi - lo;
        let [l, rr] = t.cell_dofs(p.cell);
        for (tq, w) in rule.mapped(p.lo, p.hi) {
            let load = x.load_vector(|s| f(tq, s), &exact.spatial_breakpoints, &rule);
            let mlift = m.mul_vec(&riesz.lift(&load).unwrap()).unwrap();
            for (dof, chi, dchi) in [(l, (hi - tq) / tau, -1.0 / tau), (rr, (tq - lo) / tau, 1.0 / tau)] {
                if let Some(mi) = dof {
                    for k in 0..n {
                        r[mi * n + k] += w * (dchi * mlift[k] + chi * load[k]);
                    }
                }
            }
        }
    }
    let y0 = x.load_vector(|s| (exact.y)(0.0, s), &exact.spatial_breakpoints, &rule);
    for k in 0..n {
        r[k] += y0[k];
    }
    r
}

#[test]
fn rhs_matches_direct_definition_on_ex1() {
    use std::f64::consts::PI;
    let ex = AnalyticalSolution::ex1();
    let f = |t: f64, x: f64| PI * PI * (PI * x).sin() * (PI * t).cos() - PI * (PI * x).sin() * (PI * t).sin();
    let (t, x) = spaces(5, 7);
    let riesz = RieszMap::new(&assemble_stiffness(&x)).unwrap();
    let r = assemble_rhs(&ex.source, &t, &x, &riesz).unwrap();
    let oracle = rhs_oracle(&ex, &f, &t, &x);
    // both are quadratures of the same smooth integrands; 3 vs 5 point rules
    assert!(rel_diff(&r, &oracle) < 1e-5, "{}", rel_diff(&r, &oracle));
}

#[test]
fn rhs_matches_direct_definition_on_ex3() {
    use std::f64::consts::PI;
    let ex = AnalyticalSolution::ex3();
    let f = |t: f64, x: f64| (PI * PI * (0.5 - (t - 0.5).abs()) - (t - 0.5).signum()) * (PI * x).sin();
    let (t, x) = spaces(4, 6); // t = 0.5 is not a node: breakpoint splitting matters
    let riesz = RieszMap::new(&assemble_stiffness(&x)).unwrap();
    let r = assemble_rhs(&ex.source, &t, &x, &riesz).unwrap();
    let oracle = rhs_oracle(&ex, &f, &t, &x);
    assert!(rel_diff(&r, &oracle) < 1e-5, "{}", rel_diff(&r, &oracle));
}

#[test]
fn ex1_coarse_solve_is_close_to_interpolant() {
    let ex = AnalyticalSolution::ex1();
    let (t, x) = spaces(17, 17);
    let (_, sol) = solve_problem(&t, &x, &ex.source, OperatorOptions::default(), &CgOptions::default()).unwrap();
    let interp = SpaceTimeSolution::interpolate(t.clone(), x.clone(), |tt, xx| (ex.y)(tt, xx));
    let err = rel_diff(sol.coefficients(), interp.coefficients());
    assert!(err < 0.02, "relative nodal deviation {err}");
}

#[test]
fn galerkin_equations_hold_after_solve() {
    let ex = AnalyticalSolution::ex2();
    let (t, x) = spaces(9, 9);
    for mode in [SolverMode::Dense, SolverMode::MatrixFree] {
        let (op, sol) = solve_problem(&t, &x, &ex.source, OperatorOptions::with_mode(mode), &CgOptions::default()).unwrap();
        let r = assemble_rhs(&ex.source, &t, &x, op.riesz()).unwrap();
        let sy = op.apply(sol.coefficients()).unwrap();
        assert!(rel_diff(&sy, &r) < 1e-9);
    }
}

#[test]
fn galerkin_orthogonality_on_nested_subspace() {
    // Galerkin projection of the fine solution onto the coarse tensor subspace,
    // measured in the fine bilinear form: b(y_f - P c, P v) = 0 for every coarse v.
    let ex = AnalyticalSolution::ex1();
    let (tf, xf) = spaces(9, 9);
    let (tc, xc) = spaces(5, 5);
    let (op, fine) = solve_problem(&tf, &xf, &ex.source, OperatorOptions::with_mode(SolverMode::Dense), &CgOptions::default()).unwrap();
    let nc = tc.n_dof() * xc.n_dof();
    let basis: Vec<Vec<f64>> = (0..nc)
        .map(|k| {
            let mut c = vec![0.0; nc];
            c[k] = 1.0;
            SpaceTimeSolution::new(c, tc.clone(), xc.clone()).unwrap().prolongate(&tf, &xf).into_coefficients()
        })
        .collect();
    let s_basis: Vec<Vec<f64>> = basis.iter().map(|b| op.apply(b).unwrap()).collect();
    let mut gram = DMatrix::zeros(nc, nc);
    let mut rhs = DVector::zeros(nc);
    for i in 0..nc {
        rhs[i] = crate::mesh_fe::dot(&basis[i], &op.apply(fine.coefficients()).unwrap());
        for j in 0..nc {
            gram[(i, j)] = crate::mesh_fe::dot(&basis[i], &s_basis[j]);
        }
    }
    let c = gram.cholesky().unwrap().solve(&rhs);
    let mut err = fine.coefficients().to_vec();
    for (k, b) in basis.iter().enumerate() {
        crate::mesh_fe::axpy(-c[k], b, &mut err);
    }
    let scale = op.bilinear(fine.coefficients(), fine.coefficients()).unwrap().sqrt();
    for b in &basis {
        let bnorm = op.bilinear(b, b).unwrap().sqrt();
        assert!(op.bilinear(&err, b).unwrap().abs() < 1e-10 * scale * bnorm);
    }
}

#[test]
fn energy_parts_sum_to_quadratic_form() {
    let (t, x) = spaces(8, 10);
    let op = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::MatrixFree)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let y = random_vec(&mut rng, op.dim());
        let parts = op.energy_parts(&y).unwrap();
        let q = op.bilinear(&y, &y).unwrap();
        assert!((parts.total() - q).abs() < 1e-12 * q);
        let g = op.gram(OperatorOptions::with_mode(SolverMode::MatrixFree)).unwrap();
        let qg = g.bilinear(&y, &y).unwrap();
        assert!((parts.w_norm_sq() - qg).abs() < 1e-12 * qg);
    }
}

#[test]
fn cg_budget_failure_is_reported() {
    let ex = AnalyticalSolution::ex1();
    let (t, x) = spaces(17, 17);
    let op = assemble_operator(&t, &x, OperatorOptions::with_mode(SolverMode::MatrixFree)).unwrap();
    let r = assemble_rhs(&ex.source, &t, &x, op.riesz()).unwrap();
    let res = op.solve(&r, &CgOptions { tol: 1e-12, max_iter: 2 });
    assert!(matches!(res, Err(Error::ConvergenceFailure { iterations: 2, .. })));
}
