//! Mask generation: magnitude and second-order policies, baselines, and
//! the structure-decay scheduler.

mod fisher;
mod saliency;
mod schedule;
mod second_order;
mod spd;

pub use fisher::{Damp, FisherEstimator, FisherInverse};
pub use saliency::{saliency_exact, saliency_pairwise, CandidateSet};
pub use schedule::{gradual_prune, make_decay_schedule, DecaySchedule};
pub use second_order::{
    column_search_strategy, so_prune_vnm, ColumnSearch, SaliencyMode, EXHAUSTIVE_SUBSET_LIMIT,
};
pub use spd::SymMatrix;

use crate::config::{validate_config, VnmConfig, SELECTED_COLUMNS};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::mask::SparsityMask;

/// Weight-selection policy for V:N:M pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrunePolicy {
    Magnitude,
    SecondOrderExact,
    SecondOrderPairwise,
}

impl PrunePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrunePolicy::Magnitude => "magnitude",
            PrunePolicy::SecondOrderExact => "second_order_exact",
            PrunePolicy::SecondOrderPairwise => "second_order_pairwise",
        }
    }
}

/// A pruning request: pattern plus policy. The target sparsity of a V:N:M
/// policy is always `1 - n/m`, so it is derived rather than stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSpec {
    pub cfg: VnmConfig,
    pub policy: PrunePolicy,
}

impl PruneSpec {
    pub fn target_sparsity(&self) -> f64 {
        self.cfg.sparsity()
    }
}

/// Number of entries to keep at target sparsity `s`: `ceil((1-s) * total)`.
/// A tiny guard absorbs float noise so exact grid points (e.g. `1 - 2/m`)
/// never round up one extra entry.
pub(crate) fn keep_budget(total: usize, s: f64) -> usize {
    let raw = ((1.0 - s) * total as f64 - 1e-9).ceil();
    (raw.max(0.0) as usize).min(total)
}

/// Magnitude V:N:M pruning: per block, the 4 columns with the largest L1
/// norm over the block's rows are selected (ties to the lower index); each
/// row then keeps its `n` largest-magnitude entries inside the selected
/// columns (ties to the lower column).
pub fn magnitude_prune_vnm(d: &DenseMatrix, cfg: &VnmConfig) -> Result<SparsityMask> {
    validate_config(d.rows(), d.cols(), cfg)?;
    let (r, k) = (d.rows(), d.cols());
    let (v, n, m) = (cfg.v, cfg.n, cfg.m);
    let groups = k / m;
    let nblocks = (r / v) * groups;

    let per_block = exec::map_indexed(nblocks, |b| {
        let (br, bc) = (b / groups, b % groups);
        let col_base = bc * m;

        let mut l1 = vec![0.0f64; m];
        for rv in 0..v {
            let row = d.row(br * v + rv);
            for c in 0..m {
                l1[c] += row[col_base + c].abs() as f64;
            }
        }
        let mut order: Vec<u16> = (0..m as u16).collect();
        order.sort_by(|&a, &b| {
            l1[b as usize]
                .partial_cmp(&l1[a as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut cols: Vec<u16> = order[..SELECTED_COLUMNS].to_vec();
        cols.sort_unstable();

        let mut kept_rows: Vec<Vec<u16>> = Vec::with_capacity(v);
        for rv in 0..v {
            let row = d.row(br * v + rv);
            let mut ranked: Vec<(f32, u16)> = cols
                .iter()
                .map(|&c| (row[col_base + c as usize].abs(), c))
                .collect();
            ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            kept_rows.push(ranked[..n].iter().map(|&(_, c)| c).collect());
        }
        kept_rows
    });

    let mut mask = SparsityMask::empty(r, k);
    for (b, rows) in per_block.into_iter().enumerate() {
        let (br, bc) = (b / groups, b % groups);
        for (rv, kept) in rows.into_iter().enumerate() {
            for c in kept {
                mask.set(br * v + rv, bc * m + c as usize, true);
            }
        }
    }
    Ok(mask)
}

/// Unstructured magnitude pruning: keeps the `ceil((1-s) * rows * cols)`
/// largest-magnitude entries, ties broken toward the lower linear index.
pub fn magnitude_prune_unstructured(d: &DenseMatrix, s: f64) -> SparsityMask {
    assert!(s > 0.0 && s <= 1.0, "sparsity must be in (0, 1], got {s}");
    magnitude_keep_count(d, keep_budget(d.rows() * d.cols(), s))
}

/// Unstructured magnitude pruning with an explicit keep count. Sweep code
/// uses this to evaluate the ideal policy at exactly a structured policy's
/// kept-entry count.
pub fn magnitude_keep_count(d: &DenseMatrix, keep: usize) -> SparsityMask {
    let total = d.rows() * d.cols();
    let keep = keep.min(total);
    let mut order: Vec<u32> = (0..total as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let ma = d.data()[a as usize].abs();
        let mb = d.data()[b as usize].abs();
        mb.partial_cmp(&ma).unwrap().then(a.cmp(&b))
    });
    let mut mask = SparsityMask::empty(d.rows(), d.cols());
    for &idx in &order[..keep] {
        mask.keep_mut()[idx as usize] = true;
    }
    mask
}

/// Vector-wise pruning over vertical `l x 1` segments: whole segments are
/// kept in descending segment-L1 order until the budget
/// `ceil((1-s) * (rows/l) * cols)` is met. Ties break toward the lower
/// segment index (row-major over the segment grid).
pub fn magnitude_prune_vectorwise(d: &DenseMatrix, l: usize, s: f64) -> Result<SparsityMask> {
    assert!(s > 0.0 && s <= 1.0, "sparsity must be in (0, 1], got {s}");
    if l == 0 || d.rows() % l != 0 {
        return Err(Error::NonDivisibleRows {
            rows: d.rows(),
            v: l,
        });
    }
    let seg_rows = d.rows() / l;
    let nsegs = seg_rows * d.cols();
    let budget = keep_budget(nsegs, s);

    let mut l1: Vec<f64> = vec![0.0; nsegs];
    for sr in 0..seg_rows {
        for c in 0..d.cols() {
            let mut sum = 0.0f64;
            for i in 0..l {
                sum += d.at(sr * l + i, c).abs() as f64;
            }
            l1[sr * d.cols() + c] = sum;
        }
    }
    let mut order: Vec<u32> = (0..nsegs as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        l1[b as usize]
            .partial_cmp(&l1[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut mask = SparsityMask::empty(d.rows(), d.cols());
    for &seg in &order[..budget] {
        let sr = seg as usize / d.cols();
        let c = seg as usize % d.cols();
        for i in 0..l {
            mask.set(sr * l + i, c, true);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: usize, cols: usize, data: &[f32]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn vnm_hand_example() {
        // [9,1,8,1,7,1,6,1] at 1:2:8: columns {0,2,4,6} selected, keep 9 and 8.
        let d = dense(1, 8, &[9.0, 1.0, 8.0, 1.0, 7.0, 1.0, 6.0, 1.0]);
        let mask = magnitude_prune_vnm(&d, &VnmConfig::new(1, 2, 8)).unwrap();
        let expect = [true, false, true, false, false, false, false, false];
        assert_eq!(mask.keep(), &expect);
    }

    #[test]
    fn vnm_selects_exactly_the_nonzero_columns() {
        // Only 4 columns carry nonzeros; those must be the selected ones.
        let mut data = vec![0.0f32; 2 * 8];
        for row in 0..2 {
            for &c in &[1usize, 3, 4, 6] {
                data[row * 8 + c] = 1.0 + c as f32;
            }
        }
        let d = dense(2, 8, &data);
        let cfg = VnmConfig::new(2, 2, 8);
        let mask = magnitude_prune_vnm(&d, &cfg).unwrap();
        assert!(mask.vnm_valid(&cfg));
        // Kept entries only ever sit in the nonzero columns.
        for row in 0..2 {
            for c in 0..8 {
                if mask.is_kept(row, c) {
                    assert!([1usize, 3, 4, 6].contains(&c));
                }
            }
        }
        assert_eq!(mask.popcount(), 4);
    }

    #[test]
    fn unstructured_top_two() {
        let d = dense(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let mask = magnitude_prune_unstructured(&d, 0.5);
        assert_eq!(mask.keep(), &[false, false, true, true]);
    }

    #[test]
    fn unstructured_full_sparsity_empty_mask() {
        let d = dense(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mask = magnitude_prune_unstructured(&d, 1.0);
        assert_eq!(mask.popcount(), 0);
    }

    #[test]
    fn vectorwise_full_column_segments() {
        // l = rows: one segment per column; keep the 2 largest-L1 columns.
        let d = dense(
            4,
            4,
            &[
                1.0, 5.0, 2.0, 1.0, //
                1.0, 5.0, 2.0, 1.0, //
                1.0, 5.0, 2.0, 1.0, //
                1.0, 5.0, 2.0, 1.0,
            ],
        );
        let mask = magnitude_prune_vectorwise(&d, 4, 0.5).unwrap();
        for row in 0..4 {
            assert_eq!(mask.is_kept(row, 0), false);
            assert_eq!(mask.is_kept(row, 1), true);
            assert_eq!(mask.is_kept(row, 2), true);
            assert_eq!(mask.is_kept(row, 3), false);
        }
    }

    #[test]
    fn vectorwise_sparsity_one_is_empty() {
        let d = dense(2, 3, &[1.0; 6]);
        let mask = magnitude_prune_vectorwise(&d, 2, 1.0).unwrap();
        assert_eq!(mask.popcount(), 0);
    }

    #[test]
    fn vectorwise_length_one_equals_unstructured() {
        let data: Vec<f32> = (0..48).map(|i| ((i * 31 % 17) as f32) - 8.0).collect();
        let d = dense(6, 8, &data);
        for s in [0.25, 0.5, 0.75] {
            let vw = magnitude_prune_vectorwise(&d, 1, s).unwrap();
            let un = magnitude_prune_unstructured(&d, s);
            assert_eq!(vw, un, "s={s}");
        }
    }

    #[test]
    fn vectorwise_rejects_bad_length() {
        let d = dense(4, 4, &[1.0; 16]);
        assert!(matches!(
            magnitude_prune_vectorwise(&d, 3, 0.5),
            Err(Error::NonDivisibleRows { .. })
        ));
    }

    #[test]
    fn keep_budget_grid_points() {
        // 1 - 2/m grid values must not round up an extra entry.
        for m in [8usize, 10, 16, 20, 40, 100] {
            let s = 1.0 - 2.0 / m as f64;
            let total = 10 * m;
            assert_eq!(keep_budget(total, s), 20, "m={m}");
        }
        assert_eq!(keep_budget(4, 0.5), 2);
        assert_eq!(keep_budget(10, 0.7), 3);
        assert_eq!(keep_budget(7, 1.0), 0);
    }

    #[test]
    fn prune_spec_sparsity_is_derived() {
        let spec = PruneSpec {
            cfg: VnmConfig::new(64, 2, 16),
            policy: PrunePolicy::Magnitude,
        };
        assert_eq!(spec.target_sparsity(), 0.875);
    }
}
