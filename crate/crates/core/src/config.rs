//! V:N:M pattern parameters.

use crate::error::{Error, Result};

/// Number of columns retained per block by the vector-wise stage. Fixed by
/// the half-precision 2:4 hardware mapping.
pub const SELECTED_COLUMNS: usize = 4;

/// The (V, N, M) pattern: blocks of V rows by M columns, 4 columns selected
/// per block, N values kept per row inside the selected columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VnmConfig {
    pub v: usize,
    pub n: usize,
    pub m: usize,
}

impl VnmConfig {
    pub fn new(v: usize, n: usize, m: usize) -> Self {
        Self { v, n, m }
    }

    /// Selected columns per block (always 4).
    pub fn a(&self) -> usize {
        SELECTED_COLUMNS
    }

    /// Fraction of weights removed: `1 - n/m`.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.n as f64 / self.m as f64
    }

    /// Operation-count ratio of the dense product over the sparse one: `m/n`.
    pub fn ideal_speedup(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

impl std::fmt::Display for VnmConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.v, self.n, self.m)
    }
}

/// Checks that an `r x k` matrix can carry the pattern: `v | r`, `m | k`,
/// `m >= 4` and `n = 2`.
pub fn validate_config(r: usize, k: usize, cfg: &VnmConfig) -> Result<()> {
    if cfg.n != 2 || cfg.m < SELECTED_COLUMNS || cfg.v == 0 {
        return Err(Error::UnsupportedPattern {
            v: cfg.v,
            n: cfg.n,
            m: cfg.m,
        });
    }
    if r == 0 || r % cfg.v != 0 {
        return Err(Error::NonDivisibleRows { rows: r, v: cfg.v });
    }
    if k == 0 || k % cfg.m != 0 {
        return Err(Error::NonDivisibleCols {
            cols: k,
            divisor: cfg.m,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_bert_shaped_tensor() {
        assert!(validate_config(1024, 4096, &VnmConfig::new(64, 2, 8)).is_ok());
    }

    #[test]
    fn rejects_non_divisible_rows() {
        assert!(matches!(
            validate_config(10, 16, &VnmConfig::new(4, 2, 8)),
            Err(Error::NonDivisibleRows { rows: 10, v: 4 })
        ));
    }

    #[test]
    fn rejects_narrow_block() {
        assert!(matches!(
            validate_config(8, 8, &VnmConfig::new(4, 2, 3)),
            Err(Error::UnsupportedPattern { m: 3, .. })
        ));
    }

    #[test]
    fn rejects_non_two_n() {
        assert!(matches!(
            validate_config(8, 8, &VnmConfig::new(4, 1, 4)),
            Err(Error::UnsupportedPattern { n: 1, .. })
        ));
    }

    #[test]
    fn derived_quantities() {
        let cfg = VnmConfig::new(64, 2, 8);
        assert_eq!(cfg.sparsity(), 0.75);
        assert_eq!(cfg.ideal_speedup(), 4.0);
        assert_eq!(cfg.a(), 4);
    }
}
