//! Boolean keep/drop masks sitting between pruning and compression.

use crate::config::{VnmConfig, SELECTED_COLUMNS};
use crate::error::{Error, Result};

/// Row-major boolean mask; `true` marks a kept weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl SparsityMask {
    pub fn new(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || keep.len() != rows * cols {
            return Err(Error::BadDataLength {
                rows,
                cols,
                got: keep.len(),
            });
        }
        Ok(Self { rows, cols, keep })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![false; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.keep[row * self.cols + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, kept: bool) {
        self.keep[row * self.cols + col] = kept;
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub(crate) fn keep_mut(&mut self) -> &mut [bool] {
        &mut self.keep
    }

    /// Number of kept entries.
    pub fn popcount(&self) -> usize {
        self.keep.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &SparsityMask) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .keep
                .iter()
                .zip(&other.keep)
                .all(|(&a, &b)| !a || b)
    }

    /// Row-wise N:M validity: every aligned group of `m` columns keeps at
    /// most `n` entries in every row. Used by the structure-decay scheduler
    /// before the 4-column constraint becomes enforceable.
    pub fn nm_row_valid(&self, n: usize, m: usize) -> bool {
        if m == 0 || self.cols % m != 0 {
            return false;
        }
        for row in 0..self.rows {
            let base = row * self.cols;
            for g in 0..self.cols / m {
                let kept = self.keep[base + g * m..base + (g + 1) * m]
                    .iter()
                    .filter(|&&b| b)
                    .count();
                if kept > n {
                    return false;
                }
            }
        }
        true
    }

    /// Full two-level V:N:M validity: inside every VxM block, kept entries
    /// fall into at most 4 distinct columns, and every row keeps at most
    /// `cfg.n` entries within the block.
    pub fn vnm_valid(&self, cfg: &VnmConfig) -> bool {
        if cfg.v == 0
            || cfg.m == 0
            || self.rows % cfg.v != 0
            || self.cols % cfg.m != 0
        {
            return false;
        }
        for br in 0..self.rows / cfg.v {
            for bc in 0..self.cols / cfg.m {
                let mut col_used = vec![false; cfg.m];
                for rv in 0..cfg.v {
                    let row = br * cfg.v + rv;
                    let mut row_kept = 0;
                    for c in 0..cfg.m {
                        if self.is_kept(row, bc * cfg.m + c) {
                            col_used[c] = true;
                            row_kept += 1;
                        }
                    }
                    if row_kept > cfg.n {
                        return false;
                    }
                }
                if col_used.iter().filter(|&&b| b).count() > SELECTED_COLUMNS {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_rows(rows: &[&[u8]]) -> SparsityMask {
        let r = rows.len();
        let c = rows[0].len();
        let keep = rows.iter().flat_map(|r| r.iter().map(|&b| b != 0)).collect();
        SparsityMask::new(r, c, keep).unwrap()
    }

    #[test]
    fn vnm_valid_accepts_two_of_four_columns() {
        let m = mask_from_rows(&[
            &[1, 1, 0, 0, 0, 0, 0, 0],
            &[0, 1, 0, 1, 0, 0, 0, 0],
            &[1, 0, 0, 1, 0, 0, 0, 0],
            &[0, 0, 1, 1, 0, 0, 0, 0],
        ]);
        assert!(m.vnm_valid(&VnmConfig::new(4, 2, 8)));
    }

    #[test]
    fn vnm_valid_rejects_five_columns() {
        let m = mask_from_rows(&[
            &[1, 1, 0, 0, 0, 0, 0, 0],
            &[0, 0, 1, 1, 0, 0, 0, 0],
            &[0, 0, 0, 0, 1, 0, 0, 0],
            &[0, 0, 0, 1, 0, 0, 0, 0],
        ]);
        assert!(!m.vnm_valid(&VnmConfig::new(4, 2, 8)));
    }

    #[test]
    fn vnm_valid_rejects_three_per_row() {
        let m = mask_from_rows(&[&[1, 1, 1, 0, 0, 0, 0, 0]]);
        assert!(!m.vnm_valid(&VnmConfig::new(1, 2, 8)));
    }

    #[test]
    fn row_valid_relaxed_budget() {
        let m = mask_from_rows(&[&[1, 1, 1, 0, 1, 1, 1, 0]]);
        assert!(m.nm_row_valid(3, 4));
        assert!(!m.nm_row_valid(2, 4));
        assert!(m.nm_row_valid(6, 8));
    }

    #[test]
    fn subset_relation() {
        let small = mask_from_rows(&[&[1, 0, 0, 0]]);
        let big = mask_from_rows(&[&[1, 1, 0, 0]]);
        assert!(small.is_subset_of(&big));
        assert!(!big.is_subset_of(&small));
    }
}
