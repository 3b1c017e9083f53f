//! Small dense symmetric-positive-definite helpers (f64).
//!
//! Saliency scoring and Fisher finalization only ever touch blocks up to a
//! group width, so plain Cholesky with no pivoting is enough.

use crate::error::{Error, Result};

/// Dense square symmetric matrix, row-major f64 storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: format!("{} entries for a {dim}x{dim} matrix", data.len()),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub(crate) fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Principal submatrix at the given (ascending) indices.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let q = idx.len();
        let mut out = SymMatrix::zeros(q);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.data[a * q + b] = self.at(i, j);
            }
        }
        out
    }

    /// Lower Cholesky factor; fails on any non-positive pivot.
    fn cholesky(&self) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::SingularSubmatrix);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(l)
    }

    /// Solves `self * x = b` assuming `self` is SPD.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: format!("rhs length {} vs dim {}", b.len(), self.dim),
            });
        }
        let l = self.cholesky()?;
        Ok(self.solve_with_factor(&l, b))
    }

    fn solve_with_factor(&self, l: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[k * n + i] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        y
    }

    /// Dense inverse of an SPD matrix; the result is re-symmetrized so the
    /// output satisfies the `SymMatrix` contract bit-for-bit.
    pub fn inverse_spd(&self) -> Result<SymMatrix> {
        let n = self.dim;
        let l = self.cholesky()?;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0f64; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve_with_factor(&l, &e);
            e[j] = 0.0;
            for i in 0..n {
                inv.data[i * n + j] = col[i];
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (inv.at(i, j) + inv.at(j, i));
                inv.data[i * n + j] = s;
                inv.data[j * n + i] = s;
            }
        }
        Ok(inv)
    }
}
