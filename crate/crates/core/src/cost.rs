//! Analytical cost model for the compressed SpMM.

use serde::Serialize;

use crate::config::{validate_config, VnmConfig, SELECTED_COLUMNS};
use crate::error::Result;
use crate::io::vnm_structure_bytes;

/// Operation and traffic counts for an `R x K x C` problem at a given
/// pattern. `ideal_speedup` is exactly `dense_macs / sparse_macs = m/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub dense_macs: u64,
    pub sparse_macs: u64,
    /// Total B-row loads: each of the `r/v` output block-rows loads the 4
    /// selected rows of every one of its `k/m` groups.
    pub b_rows_loaded: u64,
    pub column_loc_bytes: u64,
    pub metadata_bytes: u64,
    pub ideal_speedup: f64,
}

impl CostReport {
    /// Fraction of B rows a block-row loads versus the dense `k`: `4/m`.
    pub fn b_row_fraction(&self, r: usize, k: usize, cfg: &VnmConfig) -> f64 {
        self.b_rows_loaded as f64 / ((r / cfg.v) as f64 * k as f64)
    }
}

/// Counts MACs and metadata traffic for a dense `r x k` times `k x c`
/// product executed at pattern `cfg`.
pub fn cost_model(r: usize, k: usize, c: usize, cfg: &VnmConfig) -> Result<CostReport> {
    validate_config(r, k, cfg)?;
    let groups = (k / cfg.m) as u64;
    let dense_macs = (r * k * c) as u64;
    // k*n/m is integral because m | k.
    let sparse_macs = r as u64 * groups * cfg.n as u64 * c as u64;
    let b_rows_loaded = (r / cfg.v) as u64 * groups * SELECTED_COLUMNS as u64;
    let (_, metadata_bytes, column_loc_bytes) = vnm_structure_bytes(r, k, cfg);
    Ok(CostReport {
        dense_macs,
        sparse_macs,
        b_rows_loaded,
        column_loc_bytes: column_loc_bytes as u64,
        metadata_bytes: metadata_bytes as u64,
        ideal_speedup: cfg.ideal_speedup(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_caps() {
        // 2:10 -> 5x, and the published caps for 2:20 / 2:40 / 2:100.
        for (m, cap) in [(10usize, 5.0), (20, 10.0), (40, 20.0), (100, 50.0)] {
            let cfg = VnmConfig::new(1, 2, m);
            let rep = cost_model(16, m * 4, 8, &cfg).unwrap();
            assert_eq!(rep.ideal_speedup, cap, "m={m}");
            assert_eq!(rep.sparse_macs * (m as u64 / 2), rep.dense_macs);
        }
    }

    #[test]
    fn tile_counts_for_two_of_eight() {
        // A 16x16 logical tile at 2:8: 16 MACs per output element dense,
        // 4 sparse, and half the B rows loaded.
        let cfg = VnmConfig::new(16, 2, 8);
        let rep = cost_model(16, 16, 8, &cfg).unwrap();
        let per_elem_dense = rep.dense_macs / (16 * 8);
        let per_elem_sparse = rep.sparse_macs / (16 * 8);
        assert_eq!(per_elem_dense, 16);
        assert_eq!(per_elem_sparse, 4);
        assert_eq!(rep.b_rows_loaded, 8); // one block row, 2 groups x 4
        assert_eq!(rep.b_row_fraction(16, 16, &cfg), 0.5);
    }

    #[test]
    fn byte_counts_follow_container_layout() {
        let cfg = VnmConfig::new(64, 2, 8);
        let rep = cost_model(128, 64, 4, &cfg).unwrap();
        // column-loc: (128/64) * (64/8) * 4 entries * 2 bytes.
        assert_eq!(rep.column_loc_bytes, 2 * 8 * 4 * 2);
        // m-indices: 128 * 8 * 2 codes packed 4 per byte.
        assert_eq!(rep.metadata_bytes, (128 * 8 * 2) / 4);
    }

    #[test]
    fn propagates_validation_errors() {
        let cfg = VnmConfig::new(3, 2, 8);
        assert!(cost_model(16, 16, 8, &cfg).is_err());
    }

    #[test]
    fn json_keys_are_exact() {
        let cfg = VnmConfig::new(1, 2, 10);
        let rep = cost_model(2, 10, 1, &cfg).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        let obj = json.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(|s| s.as_str()).collect();
        assert_eq!(
            keys,
            vec![
                "dense_macs",
                "sparse_macs",
                "b_rows_loaded",
                "column_loc_bytes",
                "metadata_bytes",
                "ideal_speedup"
            ]
        );
    }
}
