//! Uniform 1D grids, continuous piecewise-linear spaces and the assembly of
//! every mass, stiffness and endpoint matrix used by the space-time system.

mod matrix;
mod quadrature;

pub use matrix::SymMatrix;
pub use quadrature::QuadRule;

use crate::error::{Error, Result};

/// Uniform grid on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
}

/// Equidistant grid with `n_nodes` nodes on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n_nodes: usize) -> Result<Grid1D> {
    Grid1D::uniform(a, b, n_nodes)
}

impl Grid1D {
    pub fn uniform(a: f64, b: f64, n_nodes: usize) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::InvalidArgument(format!(
                "a grid needs at least 2 nodes, got {n_nodes}"
            )));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid interval [{a}, {b}]")));
        }
        let h = (b - a) / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| a + i as f64 * h).collect();
        nodes[n_nodes - 1] = b;
        Ok(Self { a, b, nodes })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.n_cells() as f64
    }

    pub fn cell(&self, k: usize) -> (f64, f64) {
        (self.nodes[k], self.nodes[k + 1])
    }

    /// Index of the cell containing `x`; interior nodes belong to the cell on their right.
    pub fn locate(&self, x: f64) -> usize {
        let k = ((x - self.a) / self.spacing()).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_cells() - 1)
        }
    }

    /// Cells split at every breakpoint strictly inside them.
    pub fn panels(&self, breakpoints: &[f64]) -> Vec<Panel> {
        let eps = 1e-12 * self.spacing();
        let mut sorted: Vec<f64> = breakpoints.iter().copied().filter(|x| x.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(self.n_cells() + sorted.len());
        for k in 0..self.n_cells() {
            let (lo, hi) = self.cell(k);
            let mut start = lo;
            for &bp in sorted.iter().filter(|&&bp| bp > lo + eps && bp < hi - eps) {
                if bp > start + eps {
                    out.push(Panel { cell: k, lo: start, hi: bp });
                    start = bp;
                }
            }
            out.push(Panel { cell: k, lo: start, hi });
        }
        out
    }
}

/// Sub-interval `[lo, hi]` of cell `cell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub cell: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Composite quadrature of `f` over the grid, panels aligned with `breakpoints`.
pub fn elementwise_quadrature<F>(f: F, grid: &Grid1D, breakpoints: &[f64], rule: &QuadRule) -> f64
where
    F: Fn(f64) -> f64,
{
    grid.panels(breakpoints)
        .iter()
        .flat_map(|p| rule.mapped(p.lo, p.hi))
        .map(|(x, w)| w * f(x))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Homogeneous Dirichlet: only interior hats are degrees of freedom.
    DirichletZero,
    Free,
}

/// Continuous piecewise-linear space on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct P1Space {
    grid: Grid1D,
    bc: Boundary,
    n_dof: usize,
}

impl P1Space {
    pub fn new(grid: Grid1D, bc: Boundary) -> Result<Self> {
        let n_dof = match bc {
            Boundary::Free => grid.n_nodes(),
            Boundary::DirichletZero => {
                if grid.n_nodes() < 3 {
                    return Err(Error::InvalidArgument(
                        "a Dirichlet space needs at least 3 nodes".into(),
                    ));
                }
                grid.n_nodes() - 2
            }
        };
        Ok(Self { grid, bc, n_dof })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.bc
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    fn offset(&self) -> usize {
        match self.bc {
            Boundary::Free => 0,
            Boundary::DirichletZero => 1,
        }
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        dof + self.offset()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        let off = self.offset();
        if node < off || node - off >= self.n_dof {
            None
        } else {
            Some(node - off)
        }
    }

    /// Degrees of freedom attached to the left and right node of a cell.
    pub fn cell_dofs(&self, cell: usize) -> [Option<usize>; 2] {
        [self.dof_of_node(cell), self.dof_of_node(cell + 1)]
    }

    /// Value and derivative at `x` of the function with coefficients `coeffs`,
    /// evaluated on the given cell.
    pub fn eval_on_cell(&self, coeffs: &[f64], cell: usize, x: f64) -> (f64, f64) {
        let (lo, hi) = self.grid.cell(cell);
        let h = hi - lo;
        let [l, r] = self.cell_dofs(cell);
        let cl = l.map_or(0.0, |d| coeffs[d]);
        let cr = r.map_or(0.0, |d| coeffs[d]);
        let value = cl * (hi - x) / h + cr * (x - lo) / h;
        (value, (cr - cl) / h)
    }

    pub fn eval(&self, coeffs: &[f64], x: f64) -> f64 {
        self.eval_on_cell(coeffs, self.grid.locate(x), x).0
    }

    /// Derivative at `x`; at interior nodes the right-sided value is returned.
    pub fn eval_derivative(&self, coeffs: &[f64], x: f64) -> f64 {
        self.eval_on_cell(coeffs, self.grid.locate(x), x).1
    }

    /// Nonzero basis values `(dof, φ_dof(x))` at a point of the grid interval.
    pub fn basis_values(&self, x: f64) -> Vec<(usize, f64)> {
        let cell = self.grid.locate(x);
        let (lo, hi) = self.grid.cell(cell);
        let h = hi - lo;
        let [l, r] = self.cell_dofs(cell);
        let mut out = Vec::with_capacity(2);
        if let Some(d) = l {
            out.push((d, (hi - x) / h));
        }
        if let Some(d) = r {
            out.push((d, (x - lo) / h));
        }
        out
    }

    /// Coefficients of the nodal interpolant of `f`.
    pub fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_dof).map(|d| f(self.grid.nodes()[self.node_of_dof(d)])).collect()
    }

    /// `∫ f φ_j` for every dof `j`.
    pub fn load_vector<F: Fn(f64) -> f64>(&self, f: F, breakpoints: &[f64], rule: &QuadRule) -> Vec<f64> {
        self.integrate_basis(f, breakpoints, rule, false)
    }

    /// `∫ f φ_j'` for every dof `j`.
    pub fn derivative_load_vector<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breakpoints: &[f64],
        rule: &QuadRule,
    ) -> Vec<f64> {
        self.integrate_basis(f, breakpoints, rule, true)
    }

    fn integrate_basis<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breakpoints: &[f64],
        rule: &QuadRule,
        derivative: bool,
    ) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof];
        for p in self.grid.panels(breakpoints) {
            let (lo, hi) = self.grid.cell(p.cell);
            let h = hi - lo;
            let [l, r] = self.cell_dofs(p.cell);
            let (mut sl, mut sr) = (0.0, 0.0);
            for (x, w) in rule.mapped(p.lo, p.hi) {
                let fx = w * f(x);
                if derivative {
                    sl -= fx / h;
                    sr += fx / h;
                } else {
                    sl += fx * (hi - x) / h;
                    sr += fx * (x - lo) / h;
                }
            }
            if let Some(d) = l {
                out[d] += sl;
            }
            if let Some(d) = r {
                out[d] += sr;
            }
        }
        out
    }

    fn assemble_cellwise<F>(&self, kappa: F, breakpoints: &[f64], rule: &QuadRule, stiffness: bool) -> SymMatrix
    where
        F: Fn(f64) -> f64,
    {
        let n = self.n_dof;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for p in self.grid.panels(breakpoints) {
            let (lo, hi) = self.grid.cell(p.cell);
            let h = hi - lo;
            // local 2x2 element matrix [[e00, e01], [e01, e11]]
            let (mut e00, mut e01, mut e11) = (0.0, 0.0, 0.0);
            for (x, w) in rule.mapped(p.lo, p.hi) {
                let k = w * kappa(x);
                if stiffness {
                    let g = 1.0 / (h * h);
                    e00 += k * g;
                    e01 -= k * g;
                    e11 += k * g;
                } else {
                    let (pl, pr) = ((hi - x) / h, (x - lo) / h);
                    e00 += k * pl * pl;
                    e01 += k * pl * pr;
                    e11 += k * pr * pr;
                }
            }
            let [l, r] = self.cell_dofs(p.cell);
            if let Some(i) = l {
                diag[i] += e00;
            }
            if let Some(j) = r {
                diag[j] += e11;
            }
            if let (Some(i), Some(_)) = (l, r) {
                off[i] += e01;
            }
        }
        SymMatrix::Tridiagonal { diag, off }
    }
}

/// Stiffness matrix `∫ φ_i' φ_j'`.
pub fn assemble_stiffness(space: &P1Space) -> SymMatrix {
    assemble_weighted_stiffness(space, |_| 1.0, &[], &QuadRule::default_assembly())
}

/// Mass matrix `∫ φ_i φ_j`.
pub fn assemble_mass(space: &P1Space) -> SymMatrix {
    assemble_weighted_mass(space, |_| 1.0, &[], &QuadRule::default_assembly())
}

/// Stiffness matrix `∫ κ φ_i' φ_j'` with a coefficient `κ` that may jump at `breakpoints`.
pub fn assemble_weighted_stiffness<F: Fn(f64) -> f64>(
    space: &P1Space,
    kappa: F,
    breakpoints: &[f64],
    rule: &QuadRule,
) -> SymMatrix {
    space.assemble_cellwise(kappa, breakpoints, rule, true)
}

/// Mass matrix `∫ κ φ_i φ_j`.
pub fn assemble_weighted_mass<F: Fn(f64) -> f64>(
    space: &P1Space,
    kappa: F,
    breakpoints: &[f64],
    rule: &QuadRule,
) -> SymMatrix {
    space.assemble_cellwise(kappa, breakpoints, rule, false)
}

/// Temporal blocks of the Kronecker system.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMatrices {
    /// `∫ χ_i χ_j`
    pub mass: SymMatrix,
    /// `∫ χ̇_i χ̇_j`
    pub stiffness: SymMatrix,
    /// `χ_i(T) χ_j(T)`
    pub terminal: SymMatrix,
}

impl TemporalMatrices {
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }
}

pub fn assemble_temporal(time_space: &P1Space) -> Result<TemporalMatrices> {
    if time_space.boundary() != Boundary::Free {
        return Err(Error::InvalidArgument(
            "the temporal space must be free: the initial condition is imposed weakly".into(),
        ));
    }
    let mut end = vec![0.0; time_space.n_dof()];
    for (d, v) in time_space.basis_values(time_space.grid().b()) {
        end[d] = v;
    }
    Ok(TemporalMatrices {
        mass: assemble_mass(time_space),
        stiffness: assemble_stiffness(time_space),
        terminal: SymMatrix::RankOne { vector: end },
    })
}

/// Spatial blocks `Â` (V inner product) and `M` (H inner product).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMatrices {
    pub stiffness: SymMatrix,
    pub mass: SymMatrix,
}

impl SpatialMatrices {
    pub fn assemble(space: &P1Space) -> Self {
        Self { stiffness: assemble_stiffness(space), mass: assemble_mass(space) }
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space(n: usize, bc: Boundary) -> P1Space {
        P1Space::new(uniform_grid(0.0, 1.0, n).unwrap(), bc).unwrap()
    }

    fn assert_matrix(m: &SymMatrix, expected: &[&[f64]]) {
        assert_eq!(m.dim(), expected.len());
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((m.get(i, j) - e).abs() < 1e-13, "({i},{j}): {} vs {e}", m.get(i, j));
            }
        }
    }

    #[test]
    fn uniform_grid_nodes() {
        assert_eq!(uniform_grid(0.0, 1.0, 2).unwrap().nodes(), &[0.0, 1.0]);
        assert_eq!(uniform_grid(0.0, 1.0, 5).unwrap().nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(uniform_grid(0.0, 1.0, 3).unwrap().spacing(), 0.5);
    }

    #[test]
    fn uniform_grid_rejects_bad_input() {
        assert!(uniform_grid(0.0, 1.0, 1).is_err());
        assert!(uniform_grid(1.0, 1.0, 4).is_err());
        assert!(uniform_grid(2.0, 1.0, 4).is_err());
    }

    #[test]
    fn grid_spacing_uniform() {
        let g = uniform_grid(-0.3, 2.7, 97).unwrap();
        let h = g.spacing();
        for w in g.nodes().windows(2) {
            assert!(((w[1] - w[0]) - h).abs() <= 1e-14 * h.max(1.0) * 10.0);
        }
    }

    #[test]
    fn stiffness_examples() {
        assert_matrix(&assemble_stiffness(&space(3, Boundary::DirichletZero)), &[&[4.0]]);
        assert_matrix(
            &assemble_stiffness(&space(5, Boundary::DirichletZero)),
            &[&[8.0, -4.0, 0.0], &[-4.0, 8.0, -4.0], &[0.0, -4.0, 8.0]],
        );
        assert_matrix(&assemble_stiffness(&space(2, Boundary::Free)), &[&[1.0, -1.0], &[-1.0, 1.0]]);
    }

    #[test]
    fn mass_examples() {
        assert_matrix(&assemble_mass(&space(3, Boundary::DirichletZero)), &[&[1.0 / 3.0]]);
        let (a, b) = (1.0 / 6.0, 1.0 / 24.0);
        assert_matrix(
            &assemble_mass(&space(5, Boundary::DirichletZero)),
            &[&[a, b, 0.0], &[b, a, b], &[0.0, b, a]],
        );
        assert_matrix(
            &assemble_mass(&space(2, Boundary::Free)),
            &[&[1.0 / 3.0, 1.0 / 6.0], &[1.0 / 6.0, 1.0 / 3.0]],
        );
    }

    #[test]
    fn temporal_examples() {
        let t = assemble_temporal(&space(2, Boundary::Free)).unwrap();
        assert_matrix(&t.terminal, &[&[0.0, 0.0], &[0.0, 1.0]]);
        assert_matrix(&t.stiffness, &[&[1.0, -1.0], &[-1.0, 1.0]]);
        assert_matrix(&t.mass, &[&[1.0 / 3.0, 1.0 / 6.0], &[1.0 / 6.0, 1.0 / 3.0]]);
        assert!(assemble_temporal(&space(4, Boundary::DirichletZero)).is_err());
    }

    #[test]
    fn structural_properties() {
        let free = space(9, Boundary::Free);
        let m = assemble_mass(&free).to_dense();
        assert!((m.sum() - 1.0).abs() < 1e-14);
        let s = assemble_stiffness(&free).to_dense();
        for i in 0..9 {
            assert!(s.row(i).sum().abs() < 1e-12);
        }
        let t = assemble_temporal(&free).unwrap();
        assert_eq!(t.terminal.to_dense().rank(1e-12), 1);

        let dir = space(9, Boundary::DirichletZero);
        assert!(assemble_stiffness(&dir).to_dense().cholesky().is_some());
        assert!(assemble_mass(&dir).to_dense().cholesky().is_some());
    }

    #[test]
    fn quadrature_examples() {
        let g = uniform_grid(0.0, 1.0, 5).unwrap();
        for n in 1..=5 {
            let r = QuadRule::gauss(n).unwrap();
            assert!((elementwise_quadrature(|_| 1.0, &g, &[], &r) - 1.0).abs() < 1e-15);
        }
        let q = elementwise_quadrature(|x| (PI * x).sin(), &g, &[], &QuadRule::gauss(3).unwrap());
        assert!((q - 2.0 / PI).abs() < 1e-6);

        let g2 = uniform_grid(0.0, 1.0, 4).unwrap(); // 0.5 is not a node
        let kink = elementwise_quadrature(|t| (t - 0.5).abs(), &g2, &[0.5], &QuadRule::gauss(2).unwrap());
        assert!((kink - 0.25).abs() < 1e-15);
    }

    #[test]
    fn panels_split_only_inside() {
        let g = uniform_grid(0.0, 1.0, 4).unwrap();
        let p = g.panels(&[0.5, 0.0, 1.0 / 3.0, 2.0]);
        assert_eq!(p.len(), 4);
        assert_eq!(p[1], Panel { cell: 1, lo: 1.0 / 3.0, hi: 0.5 });
    }

    #[test]
    fn load_converges_at_interpolation_rate() {
        // ∫ sin(πx) φ_i for the hat at x = 0.5, refined twice
        let errs: Vec<f64> = [5usize, 9, 17, 33]
            .iter()
            .map(|&n| {
                let s = space(n, Boundary::DirichletZero);
                let h = s.grid().spacing();
                let load = s.load_vector(|x| (PI * x).sin(), &[], &QuadRule::default_assembly());
                let mid = s.dof_of_node((n - 1) / 2).unwrap();
                // normalised by ∫φ = h; the exact normalised value tends to sin(π/2) = 1
                (load[mid] / h - 1.0).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn evaluation_reproduces_interpolant() {
        let s = space(7, Boundary::DirichletZero);
        let c = s.interpolate(|x| x * (1.0 - x));
        for (i, &x) in s.grid().nodes().iter().enumerate() {
            assert!((s.eval(&c, x) - x * (1.0 - x)).abs() < 1e-15, "node {i}");
        }
        assert_eq!(s.eval(&c, 0.0), 0.0);
        assert!((s.eval(&c, 1.0)).abs() < 1e-15);
    }
}
