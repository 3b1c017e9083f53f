//! SpMM directly on the compressed operand, plus the dense GEMM oracle.
//!
//! Both engines accumulate in f64 with a fixed k-ascending order per output
//! element, so the sparse product matches the dense product on the
//! decompressed operand to tight tolerances and results are independent of
//! the parallel row split.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::format::VnmMatrix;

/// An SpMM instance: compressed `a` (logical R x K) times dense `b` (K x C).
#[derive(Debug, Clone)]
pub struct SpmmProblem<'a> {
    pub a: &'a VnmMatrix,
    pub b: &'a DenseMatrix,
}

impl<'a> SpmmProblem<'a> {
    pub fn new(a: &'a VnmMatrix, b: &'a DenseMatrix) -> Result<Self> {
        if a.k() != b.rows() {
            return Err(Error::DimensionMismatch {
                context: format!("a is {}x{} but b has {} rows", a.r(), a.k(), b.rows()),
            });
        }
        Ok(Self { a, b })
    }
}

/// Read-only view of the dense right-hand side. The engine goes through
/// this trait so tests can interpose an access recorder and check that only
/// rows named by column-loc are ever touched.
pub(crate) trait BSource: Sync {
    fn cols(&self) -> usize;
    fn get(&self, row: usize, col: usize) -> f32;
}

impl BSource for DenseMatrix {
    fn cols(&self) -> usize {
        self.cols()
    }
    #[inline]
    fn get(&self, row: usize, col: usize) -> f32 {
        self.at(row, col)
    }
}

pub(crate) fn spmm_with<B: BSource>(a: &VnmMatrix, b: &B) -> DenseMatrix {
    let (r, c) = (a.r(), b.cols());
    let cfg = *a.cfg();
    let groups = a.groups();
    let mut out = DenseMatrix::zeros(r, c);
    exec::for_each_chunk_mut(out.data_mut(), c, |i, row_out| {
        for col in 0..c {
            let mut acc = 0.0f64;
            for g in 0..groups {
                let off = a.group_offset(i, g);
                let sel = a.selected_columns(i, g);
                for j in 0..cfg.n {
                    let code = a.m_indices()[off + j] as usize;
                    let b_row = g * cfg.m + sel[code] as usize;
                    acc += a.values()[off + j] as f64 * b.get(b_row, col) as f64;
                }
            }
            row_out[col] = acc as f32;
        }
    });
    out
}

/// Reference SpMM on the compressed operand. The dense form of `a` is never
/// materialized: each stored value reaches its `b` row through the
/// column-loc and m-index indirection.
pub fn spmm_reference(p: &SpmmProblem<'_>) -> Result<DenseMatrix> {
    Ok(spmm_with(p.a, p.b))
}

/// Dense GEMM oracle: triple loop, f64 accumulation, k ascending.
pub fn gemm_dense(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "a is {}x{} but b has {} rows",
                a.rows(),
                a.cols(),
                b.rows()
            ),
        });
    }
    let (r, k, c) = (a.rows(), a.cols(), b.cols());
    let mut out = DenseMatrix::zeros(r, c);
    exec::for_each_chunk_mut(out.data_mut(), c, |i, row_out| {
        let a_row = a.row(i);
        for col in 0..c {
            let mut acc = 0.0f64;
            for kk in 0..k {
                acc += a_row[kk] as f64 * b.at(kk, col) as f64;
            }
            row_out[col] = acc as f32;
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VnmConfig;
    use crate::format::{compress, decompress, Dtype};
    use crate::mask::SparsityMask;
    use std::sync::atomic::{AtomicBool, Ordering};

    fn dense(rows: usize, cols: usize, data: &[f32]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn gemm_identity() {
        let b = dense(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let id = DenseMatrix::identity(2);
        assert_eq!(gemm_dense(&id, &b).unwrap(), b);
    }

    #[test]
    fn gemm_one_by_one() {
        let a = dense(1, 1, &[2.0]);
        let b = dense(1, 1, &[3.0]);
        assert_eq!(gemm_dense(&a, &b).unwrap().data(), &[6.0]);
    }

    #[test]
    fn gemm_scalar_pull_out() {
        let a = dense(2, 2, &[1.5, -2.0, 0.5, 3.0]);
        let b = dense(2, 2, &[2.0, 1.0, -1.0, 4.0]);
        let alpha = 3.0f32;
        let scaled_a = dense(2, 2, &a.data().iter().map(|&x| alpha * x).collect::<Vec<_>>());
        let lhs = gemm_dense(&scaled_a, &b).unwrap();
        let rhs = gemm_dense(&a, &b).unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((*x as f64 - alpha as f64 * *y as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn gemm_rejects_mismatch() {
        let a = dense(2, 3, &[1.0; 6]);
        let b = dense(2, 2, &[1.0; 4]);
        assert!(matches!(
            gemm_dense(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn small_compressed() -> VnmMatrix {
        let d = dense(2, 8, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let keep: Vec<bool> = d.data().iter().map(|&v| v != 0.0).collect();
        let mask = SparsityMask::new(2, 8, keep).unwrap();
        compress(&d, &mask, &VnmConfig::new(2, 2, 8), Dtype::Real32).unwrap()
    }

    #[test]
    fn identity_rhs_reproduces_decompressed() {
        let a = small_compressed();
        let b = DenseMatrix::identity(8);
        let p = SpmmProblem::new(&a, &b).unwrap();
        let out = spmm_reference(&p).unwrap();
        assert_eq!(out, decompress(&a).unwrap());
    }

    #[test]
    fn all_zero_values_give_zero_output() {
        let cfg = VnmConfig::new(1, 2, 8);
        let a = VnmMatrix::from_parts(
            1,
            8,
            cfg,
            Dtype::Real32,
            vec![0.0, 0.0],
            vec![0, 1],
            vec![0, 1, 2, 3],
        )
        .unwrap();
        let b = dense(8, 3, &[1.0; 24]);
        let p = SpmmProblem::new(&a, &b).unwrap();
        let out = spmm_reference(&p).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn problem_rejects_inner_mismatch() {
        let a = small_compressed();
        let b = dense(4, 2, &[1.0; 8]);
        assert!(matches!(
            SpmmProblem::new(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Records which b rows get read; flags are atomic so the engine's
    /// parallel row split stays legal.
    struct RecordingB<'a> {
        inner: &'a DenseMatrix,
        touched: Vec<AtomicBool>,
    }

    impl BSource for RecordingB<'_> {
        fn cols(&self) -> usize {
            self.inner.cols()
        }
        fn get(&self, row: usize, col: usize) -> f32 {
            self.touched[row].store(true, Ordering::Relaxed);
            self.inner.at(row, col)
        }
    }

    #[test]
    fn only_column_loc_rows_are_read() {
        let a = small_compressed();
        let b = dense(8, 4, &(0..32).map(|i| i as f32).collect::<Vec<_>>());
        let rec = RecordingB {
            inner: &b,
            touched: (0..8).map(|_| AtomicBool::new(false)).collect(),
        };
        let out = spmm_with(&a, &rec);

        // Expected reachable rows: union over blocks/groups of the selected
        // columns (offset by the group base).
        let mut reachable = vec![false; 8];
        for i in 0..a.r() {
            for g in 0..a.groups() {
                let off = a.group_offset(i, g);
                let sel = a.selected_columns(i, g);
                for j in 0..a.cfg().n {
                    let code = a.m_indices()[off + j] as usize;
                    reachable[g * a.cfg().m + sel[code] as usize] = true;
                }
            }
        }
        for row in 0..8 {
            let touched = rec.touched[row].load(Ordering::Relaxed);
            assert!(
                !touched || reachable[row],
                "row {row} read but not named by column-loc"
            );
        }
        // And the result still matches the oracle.
        let oracle = gemm_dense(&decompress(&a).unwrap(), &b).unwrap();
        assert_eq!(out, oracle);
    }
}
