//! Dense row-major matrix, the uncompressed operand.

use crate::error::{Error, Result};

/// Row-major dense matrix with 32-bit real storage.
///
/// Construction rejects non-finite values; everything downstream can
/// assume clean data.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::BadDataLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix, used as the neutral SpMM operand in tests.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Elementwise product with a boolean mask of the same shape.
    pub fn masked(&self, keep: &crate::mask::SparsityMask) -> Result<DenseMatrix> {
        if keep.rows() != self.rows || keep.cols() != self.cols {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "mask {}x{} vs matrix {}x{}",
                    keep.rows(),
                    keep.cols(),
                    self.rows,
                    self.cols
                ),
            });
        }
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| if keep.keep()[i] { v } else { 0.0 })
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::BadDataLength { got: 3, .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            DenseMatrix::new(1, 3, vec![1.0, f32::NAN, 2.0]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![f32::INFINITY, 2.0]),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn identity_diagonal() {
        let id = DenseMatrix::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(id.at(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }
}
