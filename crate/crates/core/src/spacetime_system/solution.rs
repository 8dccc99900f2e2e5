use crate::error::{check_len, Result};
use crate::mesh_fe::P1Space;

/// Coefficients of `y_d(t, x) = Σ_m Σ_n y_n^m χ_m(t) φ_n(x)`, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSolution {
    coefficients: Vec<f64>,
    time_space: P1Space,
    space: P1Space,
}

impl SpaceTimeSolution {
    pub fn new(coefficients: Vec<f64>, time_space: P1Space, space: P1Space) -> Result<Self> {
        check_len(time_space.n_dof() * space.n_dof(), coefficients.len())?;
        Ok(Self { coefficients, time_space, space })
    }

    pub fn zero(time_space: P1Space, space: P1Space) -> Self {
        let n = time_space.n_dof() * space.n_dof();
        Self { coefficients: vec![0.0; n], time_space, space }
    }

    /// Nodal interpolant of `f(t, x)`.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(time_space: P1Space, space: P1Space, f: F) -> Self {
        let mut coefficients = Vec::with_capacity(time_space.n_dof() * space.n_dof());
        for m in 0..time_space.n_dof() {
            let t = time_space.grid().nodes()[time_space.node_of_dof(m)];
            coefficients.extend(space.interpolate(|x| f(t, x)));
        }
        Self { coefficients, time_space, space }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn time_space(&self) -> &P1Space {
        &self.time_space
    }

    pub fn space(&self) -> &P1Space {
        &self.space
    }

    pub fn block(&self, m: usize) -> &[f64] {
        let n = self.space.n_dof();
        &self.coefficients[m * n..(m + 1) * n]
    }

    /// Spatial coefficients of `y_d(t, ·)` and `∂_t y_d(t, ·)` on the given time cell.
    pub fn time_slice(&self, time_cell: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.space.n_dof();
        let (lo, hi) = self.time_space.grid().cell(time_cell);
        let tau = hi - lo;
        let [l, r] = self.time_space.cell_dofs(time_cell);
        let (wl, wr) = ((hi - t) / tau, (t - lo) / tau);
        let mut value = vec![0.0; n];
        let mut rate = vec![0.0; n];
        if let Some(m) = l {
            for ((v, d), y) in value.iter_mut().zip(rate.iter_mut()).zip(self.block(m)) {
                *v += wl * y;
                *d -= y / tau;
            }
        }
        if let Some(m) = r {
            for ((v, d), y) in value.iter_mut().zip(rate.iter_mut()).zip(self.block(m)) {
                *v += wr * y;
                *d += y / tau;
            }
        }
        (value, rate)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let (c, _) = self.time_slice(self.time_space.grid().locate(t), t);
        self.space.eval(&c, x)
    }

    /// `∂_t y_d`, right-sided at time nodes.
    pub fn eval_dt(&self, t: f64, x: f64) -> f64 {
        let (_, d) = self.time_slice(self.time_space.grid().locate(t), t);
        self.space.eval(&d, x)
    }

    /// `∂_x y_d`, right-sided at spatial nodes.
    pub fn eval_dx(&self, t: f64, x: f64) -> f64 {
        let (c, _) = self.time_slice(self.time_space.grid().locate(t), t);
        self.space.eval_derivative(&c, x)
    }

    /// Spatial coefficients at the final time.
    pub fn terminal_slice(&self) -> Vec<f64> {
        let grid = self.time_space.grid();
        self.time_slice(grid.n_cells() - 1, grid.b()).0
    }

    /// Nodal values on other spaces; exact transfer into nested finer grids.
    pub fn prolongate(&self, time_space: &P1Space, space: &P1Space) -> SpaceTimeSolution {
        SpaceTimeSolution::interpolate(time_space.clone(), space.clone(), |t, x| self.eval(t, x))
    }

    /// Values at every grid node including the boundary, as `(t, x, value)` rows.
    pub fn nodal_values(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &t in self.time_space.grid().nodes() {
            for &x in self.space.grid().nodes() {
                out.push((t, x, self.eval(t, x)));
            }
        }
        out
    }
}
