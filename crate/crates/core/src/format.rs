//! The compressed V:N:M layout and its lossless conversions.
//!
//! A compressed matrix carries three structures:
//! * `values` - the kept entries, `r * (k/m) * n` of them;
//! * `m_indices` - a 2-bit code per value naming which of the block's 4
//!   selected columns holds it;
//! * `column_loc` - per VxM block, the 4 original columns (relative to the
//!   block) chosen by the vector-wise stage, `(r/v) * (k/m) * 4` entries.
//!
//! Canonical storage order is block-row-major (blocks left to right, top to
//! bottom), then row within the block, then ascending m-index. Ties break
//! toward the lower index everywhere, so compression is deterministic and
//! byte-exact across runs and thread counts.

use crate::config::{validate_config, VnmConfig, SELECTED_COLUMNS};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::mask::SparsityMask;

/// Storage treatment of the compressed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    /// Values stored exactly as given (32-bit).
    Real32,
    /// Values rounded through 16-bit precision when compressed, then held
    /// in 32-bit storage. Exercises half-precision sensitivity.
    HalfEmulated,
}

impl Dtype {
    pub fn to_u8(self) -> u8 {
        match self {
            Dtype::Real32 => 0,
            Dtype::HalfEmulated => 1,
        }
    }

    pub fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Dtype::Real32),
            1 => Ok(Dtype::HalfEmulated),
            other => Err(Error::InvalidContainer {
                context: format!("unknown dtype byte {other}"),
            }),
        }
    }
}

/// A matrix compressed to the three-structure V:N:M layout.
#[derive(Debug, Clone, PartialEq)]
pub struct VnmMatrix {
    r: usize,
    k: usize,
    cfg: VnmConfig,
    dtype: Dtype,
    values: Vec<f32>,
    m_indices: Vec<u8>,
    column_loc: Vec<u16>,
}

impl VnmMatrix {
    /// Rebuilds a compressed matrix from raw parts, checking every
    /// structural invariant. Used by the container reader.
    pub fn from_parts(
        r: usize,
        k: usize,
        cfg: VnmConfig,
        dtype: Dtype,
        values: Vec<f32>,
        m_indices: Vec<u8>,
        column_loc: Vec<u16>,
    ) -> Result<Self> {
        validate_config(r, k, &cfg)?;
        let groups = k / cfg.m;
        let nvals = r * groups * cfg.n;
        let nloc = (r / cfg.v) * groups * SELECTED_COLUMNS;
        if values.len() != nvals || m_indices.len() != nvals || column_loc.len() != nloc {
            return Err(Error::CorruptMetadata {
                context: format!(
                    "expected {nvals} values/codes and {nloc} column-loc entries, got {}/{}/{}",
                    values.len(),
                    m_indices.len(),
                    column_loc.len()
                ),
            });
        }
        let mat = Self {
            r,
            k,
            cfg,
            dtype,
            values,
            m_indices,
            column_loc,
        };
        mat.check_metadata()?;
        Ok(mat)
    }

    fn check_metadata(&self) -> Result<()> {
        let cfg = &self.cfg;
        for (b, loc) in self.column_loc.chunks_exact(SELECTED_COLUMNS).enumerate() {
            for w in loc.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::CorruptMetadata {
                        context: format!("column_loc not strictly increasing in block {b}"),
                    });
                }
            }
            if loc[SELECTED_COLUMNS - 1] as usize >= cfg.m {
                return Err(Error::CorruptMetadata {
                    context: format!("column_loc entry out of range in block {b}"),
                });
            }
        }
        for (g, codes) in self.m_indices.chunks_exact(cfg.n).enumerate() {
            for w in codes.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::CorruptMetadata {
                        context: format!("duplicate or unordered m-index in row-group {g}"),
                    });
                }
            }
            if codes[cfg.n - 1] as usize >= SELECTED_COLUMNS {
                return Err(Error::CorruptMetadata {
                    context: format!("m-index out of range in row-group {g}"),
                });
            }
        }
        Ok(())
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cfg(&self) -> &VnmConfig {
        &self.cfg
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn m_indices(&self) -> &[u8] {
        &self.m_indices
    }

    pub fn column_loc(&self) -> &[u16] {
        &self.column_loc
    }

    /// Number of block columns, `k/m`.
    pub fn groups(&self) -> usize {
        self.k / self.cfg.m
    }

    /// Offset of the first stored value of logical row `i`, block column `g`.
    #[inline]
    pub fn group_offset(&self, i: usize, g: usize) -> usize {
        let cfg = &self.cfg;
        let block = (i / cfg.v) * self.groups() + g;
        (block * cfg.v + i % cfg.v) * cfg.n
    }

    /// The 4 selected (block-relative) columns of block row `i/v`, block
    /// column `g`.
    #[inline]
    pub fn selected_columns(&self, i: usize, g: usize) -> &[u16] {
        let block = (i / self.cfg.v) * self.groups() + g;
        &self.column_loc[block * SELECTED_COLUMNS..(block + 1) * SELECTED_COLUMNS]
    }
}

fn round_through_half(v: f32) -> f32 {
    half::f16::from_f32(v).to_f32()
}

struct BlockEnc {
    cols: [u16; SELECTED_COLUMNS],
    vals: Vec<f32>,
    codes: Vec<u8>,
}

fn encode_block(
    d: &DenseMatrix,
    mask: &SparsityMask,
    cfg: &VnmConfig,
    br: usize,
    bc: usize,
    dtype: Dtype,
) -> Result<BlockEnc> {
    let (v, n, m) = (cfg.v, cfg.n, cfg.m);
    let col_base = bc * m;

    let mut used = vec![false; m];
    for rv in 0..v {
        let row = br * v + rv;
        for c in 0..m {
            if mask.is_kept(row, col_base + c) {
                used[c] = true;
            }
        }
    }
    let mut cols: Vec<u16> = (0..m).filter(|&c| used[c]).map(|c| c as u16).collect();
    if cols.len() > SELECTED_COLUMNS {
        return Err(Error::InvalidMask {
            block_row: br,
            block_col: bc,
        });
    }
    // Pad with the smallest unused block columns; the result stays sorted.
    for c in 0..m {
        if cols.len() == SELECTED_COLUMNS {
            break;
        }
        if !used[c] {
            cols.push(c as u16);
        }
    }
    cols.sort_unstable();
    let cols: [u16; SELECTED_COLUMNS] = cols.try_into().expect("padded to 4 columns");

    let mut vals = Vec::with_capacity(v * n);
    let mut codes = Vec::with_capacity(v * n);
    for rv in 0..v {
        let row = br * v + rv;
        let mut picked: Vec<(u8, f32)> = Vec::with_capacity(n);
        for (code, &c) in cols.iter().enumerate() {
            if mask.is_kept(row, col_base + c as usize) {
                picked.push((code as u8, d.at(row, col_base + c as usize)));
            }
        }
        if picked.len() > n {
            return Err(Error::InvalidMask {
                block_row: br,
                block_col: bc,
            });
        }
        // Pad short rows with explicit zeros on the smallest free codes.
        for code in 0..SELECTED_COLUMNS as u8 {
            if picked.len() == n {
                break;
            }
            if !picked.iter().any(|&(p, _)| p == code) {
                picked.push((code, 0.0));
            }
        }
        picked.sort_unstable_by_key(|&(code, _)| code);
        for (code, val) in picked {
            let val = match dtype {
                Dtype::Real32 => val,
                Dtype::HalfEmulated => round_through_half(val),
            };
            vals.push(val);
            codes.push(code);
        }
    }
    Ok(BlockEnc { cols, vals, codes })
}

/// Compresses a masked dense matrix into the three-structure layout.
///
/// The mask must satisfy [`SparsityMask::vnm_valid`]; blocks with fewer
/// than 4 occupied columns or rows with fewer than `n` kept entries are
/// padded deterministically (lowest free index wins), so the output is
/// byte-identical across runs.
pub fn compress(
    d: &DenseMatrix,
    mask: &SparsityMask,
    cfg: &VnmConfig,
    dtype: Dtype,
) -> Result<VnmMatrix> {
    validate_config(d.rows(), d.cols(), cfg)?;
    if mask.rows() != d.rows() || mask.cols() != d.cols() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "mask {}x{} vs matrix {}x{}",
                mask.rows(),
                mask.cols(),
                d.rows(),
                d.cols()
            ),
        });
    }
    let (r, k) = (d.rows(), d.cols());
    let groups = k / cfg.m;
    let block_rows = r / cfg.v;
    let nblocks = block_rows * groups;

    let encoded = exec::map_indexed(nblocks, |b| {
        encode_block(d, mask, cfg, b / groups, b % groups, dtype)
    });

    let mut values = Vec::with_capacity(r * groups * cfg.n);
    let mut m_indices = Vec::with_capacity(r * groups * cfg.n);
    let mut column_loc = Vec::with_capacity(nblocks * SELECTED_COLUMNS);
    for enc in encoded {
        let enc = enc?;
        values.extend_from_slice(&enc.vals);
        m_indices.extend_from_slice(&enc.codes);
        column_loc.extend_from_slice(&enc.cols);
    }

    Ok(VnmMatrix {
        r,
        k,
        cfg: *cfg,
        dtype,
        values,
        m_indices,
        column_loc,
    })
}

/// Expands a compressed matrix back to dense form. Positions not named by
/// the metadata come back as exact zeros.
pub fn decompress(s: &VnmMatrix) -> Result<DenseMatrix> {
    s.check_metadata()?;
    let (r, k) = (s.r, s.k);
    let cfg = s.cfg;
    let mut out = DenseMatrix::zeros(r, k);
    exec::for_each_chunk_mut(out.data_mut(), k, |i, row| {
        for g in 0..s.groups() {
            let off = s.group_offset(i, g);
            let sel = s.selected_columns(i, g);
            for j in 0..cfg.n {
                let code = s.m_indices[off + j] as usize;
                let col = g * cfg.m + sel[code] as usize;
                row[col] = s.values[off + j];
            }
        }
    });
    Ok(out)
}

/// Recovers the structural keep mask: true exactly at stored positions.
/// Every row-group stores exactly `n` values, so the popcount is always
/// `r * (k/m) * n` - padding slots count as kept.
pub fn mask_of(s: &VnmMatrix) -> Result<SparsityMask> {
    s.check_metadata()?;
    let (r, k) = (s.r, s.k);
    let cfg = s.cfg;
    let mut mask = SparsityMask::empty(r, k);
    exec::for_each_chunk_mut(mask.keep_mut(), k, |i, row| {
        for g in 0..s.groups() {
            let off = s.group_offset(i, g);
            let sel = s.selected_columns(i, g);
            for j in 0..cfg.n {
                let code = s.m_indices[off + j] as usize;
                row[g * cfg.m + sel[code] as usize] = true;
            }
        }
    });
    Ok(mask)
}
