//! Tile-level reference of the sparse MMA instruction.
//!
//! This models the native 2:4 semantics an instruction tile sees, before
//! the V:N:M column-loc indirection: a 16 x k logical tile stores k/2
//! values per row, and each 2-bit code places a value inside its group of
//! 4 logical columns.

use crate::error::{Error, Result};

/// Tile rows fixed by the instruction.
pub const TILE_ROWS: usize = 16;
/// Tile output columns fixed by the instruction.
pub const TILE_COLS: usize = 8;

/// Instruction tile shape; only the half-precision k dimensions exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileShape {
    mma_k: usize,
}

impl TileShape {
    pub fn new(mma_k: usize) -> Result<Self> {
        if mma_k != 16 && mma_k != 32 {
            return Err(Error::IllegalMetadata {
                context: format!("mma_k must be 16 or 32, got {mma_k}"),
            });
        }
        Ok(Self { mma_k })
    }

    pub fn k16() -> Self {
        Self { mma_k: 16 }
    }

    pub fn k32() -> Self {
        Self { mma_k: 32 }
    }

    pub fn mma_r(&self) -> usize {
        TILE_ROWS
    }

    pub fn mma_c(&self) -> usize {
        TILE_COLS
    }

    pub fn mma_k(&self) -> usize {
        self.mma_k
    }

    /// Stored values per tile row at 2:4 sparsity.
    pub fn stored_per_row(&self) -> usize {
        self.mma_k / 2
    }
}

/// One sparse multiply-accumulate tile: returns `c_in + A_decompressed * b`.
///
/// * `a_vals` - `16 x (k/2)` stored values, row-major.
/// * `meta` - one 2-bit code per stored value; each group of 4 logical
///   columns holds 2 values whose codes are strictly increasing.
/// * `b` - `k x 8` dense tile, row-major.
/// * `c_in` - `16 x 8` accumulator input, row-major.
pub fn mma_sp_tile(
    a_vals: &[f32],
    meta: &[u8],
    b: &[f32],
    c_in: &[f32],
    shape: TileShape,
) -> Result<Vec<f32>> {
    let k = shape.mma_k();
    let stored = shape.stored_per_row();
    if a_vals.len() != TILE_ROWS * stored || meta.len() != TILE_ROWS * stored {
        return Err(Error::DimensionMismatch {
            context: format!(
                "expected {} values/codes, got {}/{}",
                TILE_ROWS * stored,
                a_vals.len(),
                meta.len()
            ),
        });
    }
    if b.len() != k * TILE_COLS || c_in.len() != TILE_ROWS * TILE_COLS {
        return Err(Error::DimensionMismatch {
            context: format!("b len {} or c_in len {} wrong for k={k}", b.len(), c_in.len()),
        });
    }
    for pair in meta.chunks_exact(2) {
        if pair[0] >= 4 || pair[1] >= 4 {
            return Err(Error::IllegalMetadata {
                context: format!("code out of range in pair {pair:?}"),
            });
        }
        if pair[0] >= pair[1] {
            return Err(Error::IllegalMetadata {
                context: format!("codes not strictly increasing in pair {pair:?}"),
            });
        }
    }

    let mut out = vec![0.0f32; TILE_ROWS * TILE_COLS];
    for i in 0..TILE_ROWS {
        for col in 0..TILE_COLS {
            let mut acc = c_in[i * TILE_COLS + col] as f64;
            for s in 0..stored {
                let group = s / 2;
                let code = meta[i * stored + s] as usize;
                let b_row = group * 4 + code;
                acc += a_vals[i * stored + s] as f64 * b[b_row * TILE_COLS + col] as f64;
            }
            out[i * TILE_COLS + col] = acc as f32;
        }
    }
    Ok(out)
}

/// Expands a tile's stored values to the dense `16 x k` form. Test oracles
/// multiply this against `b` directly.
pub fn tile_decompress(a_vals: &[f32], meta: &[u8], shape: TileShape) -> Result<Vec<f32>> {
    let k = shape.mma_k();
    let stored = shape.stored_per_row();
    if a_vals.len() != TILE_ROWS * stored || meta.len() != TILE_ROWS * stored {
        return Err(Error::DimensionMismatch {
            context: "tile value/metadata size".to_string(),
        });
    }
    let mut dense = vec![0.0f32; TILE_ROWS * k];
    for i in 0..TILE_ROWS {
        for s in 0..stored {
            let group = s / 2;
            let code = meta[i * stored + s] as usize;
            if code >= 4 {
                return Err(Error::IllegalMetadata {
                    context: format!("code {code} out of range"),
                });
            }
            dense[i * k + group * 4 + code] = a_vals[i * stored + s];
        }
    }
    Ok(dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_guard() {
        assert!(TileShape::new(16).is_ok());
        assert!(TileShape::new(32).is_ok());
        assert!(TileShape::new(8).is_err());
        assert!(TileShape::new(64).is_err());
        assert_eq!(TileShape::k32().mma_r(), 16);
        assert_eq!(TileShape::k32().mma_c(), 8);
        assert_eq!(TileShape::k32().stored_per_row(), 16);
    }

    #[test]
    fn leading_positions_with_identity_b() {
        // Codes (0,1) in every group, b = identity over the first 8 rows:
        // each value lands in the output column equal to its logical column.
        let shape = TileShape::k16();
        let stored = shape.stored_per_row();
        let a_vals: Vec<f32> = (0..TILE_ROWS * stored).map(|i| (i % 7) as f32 + 1.0).collect();
        let meta: Vec<u8> = (0..TILE_ROWS * stored).map(|i| (i % 2) as u8).collect();
        // b: k x 8, identity on the top 8x8, zeros below.
        let mut b = vec![0.0f32; 16 * 8];
        for i in 0..8 {
            b[i * 8 + i] = 1.0;
        }
        let c_in = vec![0.0f32; 16 * 8];
        let out = mma_sp_tile(&a_vals, &meta, &b, &c_in, shape).unwrap();
        // Logical columns of stored value s: group*4 + (s%2); groups 0..4.
        for i in 0..TILE_ROWS {
            for s in 0..stored {
                let logical = (s / 2) * 4 + s % 2;
                if logical < 8 {
                    assert_eq!(out[i * 8 + logical], a_vals[i * stored + s]);
                }
            }
        }
    }

    #[test]
    fn zero_inputs_zero_output() {
        let shape = TileShape::k32();
        let stored = shape.stored_per_row();
        let a_vals = vec![0.0f32; TILE_ROWS * stored];
        let meta: Vec<u8> = (0..TILE_ROWS * stored).map(|i| (i % 2) as u8).collect();
        let b = vec![0.5f32; 32 * 8];
        let c_in = vec![0.0f32; 16 * 8];
        let out = mma_sp_tile(&a_vals, &meta, &b, &c_in, shape).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_illegal_metadata() {
        let shape = TileShape::k16();
        let stored = shape.stored_per_row();
        let a_vals = vec![1.0f32; TILE_ROWS * stored];
        let b = vec![0.0f32; 16 * 8];
        let c_in = vec![0.0f32; 16 * 8];
        let mut meta: Vec<u8> = (0..TILE_ROWS * stored).map(|i| (i % 2) as u8).collect();
        meta[0] = 4;
        assert!(matches!(
            mma_sp_tile(&a_vals, &meta, &b, &c_in, shape),
            Err(Error::IllegalMetadata { .. })
        ));
        meta[0] = 1;
        meta[1] = 1; // duplicate position in a pair
        assert!(matches!(
            mma_sp_tile(&a_vals, &meta, &b, &c_in, shape),
            Err(Error::IllegalMetadata { .. })
        ));
    }
}
