use nalgebra::DMatrix;

use crate::error::{check_len, Result};

/// Symmetric matrix with storage specialised to the 1D structures that occur.
#[derive(Debug, Clone, PartialEq)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    /// `diag.len() == n`, `off.len() == n - 1` with `off[i] = a[i][i + 1]`.
    Tridiagonal { diag: Vec<f64>, off: Vec<f64> },
    /// `v vᵀ`.
    RankOne { vector: Vec<f64> },
    Diagonal(Vec<f64>),
}

impl SymMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => m.nrows(),
            SymMatrix::Tridiagonal { diag, .. } => diag.len(),
            SymMatrix::RankOne { vector } => vector.len(),
            SymMatrix::Diagonal(d) => d.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SymMatrix::Dense(m) => m[(i, j)],
            SymMatrix::Tridiagonal { diag, off } => {
                if i == j {
                    diag[i]
                } else if i + 1 == j {
                    off[i]
                } else if j + 1 == i {
                    off[j]
                } else {
                    0.0
                }
            }
            SymMatrix::RankOne { vector } => vector[i] * vector[j],
            SymMatrix::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `out += alpha * A x`.
    pub fn mul_add(&self, alpha: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match self {
            SymMatrix::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row: f64 = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                    *o += alpha * row;
                }
            }
            SymMatrix::Tridiagonal { diag, off } => {
                let n = diag.len();
                for i in 0..n {
                    let mut s = diag[i] * x[i];
                    if i > 0 {
                        s += off[i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        s += off[i] * x[i + 1];
                    }
                    out[i] += alpha * s;
                }
            }
            SymMatrix::RankOne { vector } => {
                let dot: f64 = vector.iter().zip(x).map(|(a, b)| a * b).sum();
                for (o, v) in out.iter_mut().zip(vector) {
                    *o += alpha * dot * v;
                }
            }
            SymMatrix::Diagonal(d) => {
                for ((o, di), xi) in out.iter_mut().zip(d).zip(x) {
                    *o += alpha * di * xi;
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.mul_add(1.0, x, &mut out);
        Ok(out)
    }

    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.mul_vec(x)?;
        Ok(ax.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(m) => m.clone(),
            _ => {
                let n = self.dim();
                DMatrix::from_fn(n, n, |i, j| self.get(i, j))
            }
        }
    }

    /// Largest absolute asymmetry relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        match self {
            SymMatrix::Dense(m) => {
                let scale = m.amax().max(f64::MIN_POSITIVE);
                (m - m.transpose()).amax() / scale
            }
            _ => 0.0,
        }
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        match self {
            SymMatrix::Dense(m) => SymMatrix::Dense(m * alpha),
            SymMatrix::Tridiagonal { diag, off } => SymMatrix::Tridiagonal {
                diag: diag.iter().map(|d| alpha * d).collect(),
                off: off.iter().map(|o| alpha * o).collect(),
            },
            SymMatrix::RankOne { .. } => SymMatrix::Dense(self.to_dense() * alpha),
            SymMatrix::Diagonal(d) => SymMatrix::Diagonal(d.iter().map(|x| alpha * x).collect()),
        }
    }

    /// `self + alpha * other` for two tridiagonal matrices, dense otherwise.
    pub fn add_scaled(&self, alpha: f64, other: &SymMatrix) -> Result<SymMatrix> {
        check_len(self.dim(), other.dim())?;
        Ok(match (self, other) {
            (
                SymMatrix::Tridiagonal { diag: d1, off: o1 },
                SymMatrix::Tridiagonal { diag: d2, off: o2 },
            ) => SymMatrix::Tridiagonal {
                diag: d1.iter().zip(d2).map(|(a, b)| a + alpha * b).collect(),
                off: o1.iter().zip(o2).map(|(a, b)| a + alpha * b).collect(),
            },
            _ => SymMatrix::Dense(self.to_dense() + other.to_dense() * alpha),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_products_match_dense() {
        let mats = [
            SymMatrix::Tridiagonal { diag: vec![2.0, 3.0, 4.0], off: vec![-1.0, 0.5] },
            SymMatrix::RankOne { vector: vec![0.0, 1.0, 2.0] },
            SymMatrix::Diagonal(vec![1.0, -2.0, 3.0]),
        ];
        let x = [0.3, -1.2, 2.5];
        for m in &mats {
            let dense = m.to_dense();
            let expected = &dense * nalgebra::DVector::from_column_slice(&x);
            let got = m.mul_vec(&x).unwrap();
            for i in 0..3 {
                assert!((got[i] - expected[i]).abs() < 1e-15);
            }
            assert_eq!(dense, dense.transpose());
        }
    }

    #[test]
    fn mismatched_length_is_rejected() {
        let m = SymMatrix::Diagonal(vec![1.0, 2.0]);
        assert!(m.mul_vec(&[1.0]).is_err());
    }
}
