//! Binary containers.
//!
//! All integers and floats are little-endian.
//!
//! * `DMX1` - dense matrix: magic, u32 rows, u32 cols, u8 dtype, then the
//!   row-major f32 payload.
//! * `VNM1` - compressed matrix: magic, u32 version=1, u32 r, u32 k,
//!   u32 v, u32 n, u32 m, u8 dtype, values in canonical order, m-indices
//!   packed 4 codes per byte (code `i` sits in bits `2i..2i+2`), then
//!   column-loc as u16.
//! * `MSK1` - sparsity mask: magic, u32 rows, u32 cols, then the row-major
//!   keep bits packed 8 per byte, least-significant bit first.

use std::io::{Read, Write};

use crate::config::{VnmConfig, SELECTED_COLUMNS};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::format::{Dtype, VnmMatrix};
use crate::mask::SparsityMask;

const DMX_MAGIC: &[u8; 4] = b"DMX1";
const VNM_MAGIC: &[u8; 4] = b"VNM1";
const MSK_MAGIC: &[u8; 4] = b"MSK1";
const VNM_VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4], what: &str) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::InvalidContainer {
            context: format!("bad {what} magic {buf:?}"),
        });
    }
    Ok(())
}

fn checked_dims(rows: u32, cols: u32, what: &str) -> Result<(usize, usize)> {
    let (r, c) = (rows as usize, cols as usize);
    if r == 0 || c == 0 || r.checked_mul(c).is_none() {
        return Err(Error::InvalidContainer {
            context: format!("bad {what} dimensions {rows}x{cols}"),
        });
    }
    Ok((r, c))
}

pub fn write_dense<W: Write>(w: &mut W, d: &DenseMatrix, dtype: Dtype) -> Result<()> {
    w.write_all(DMX_MAGIC)?;
    write_u32(w, d.rows() as u32)?;
    write_u32(w, d.cols() as u32)?;
    w.write_all(&[dtype.to_u8()])?;
    for v in d.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dense<R: Read>(r: &mut R) -> Result<(DenseMatrix, Dtype)> {
    expect_magic(r, DMX_MAGIC, "DMX1")?;
    let rows = read_u32(r)?;
    let cols = read_u32(r)?;
    let (rows, cols) = checked_dims(rows, cols, "DMX1")?;
    let dtype = Dtype::from_u8(read_u8(r)?)?;
    let mut data = vec![0f32; rows * cols];
    let mut buf = [0u8; 4];
    for v in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f32::from_le_bytes(buf);
    }
    let d = DenseMatrix::new(rows, cols, data)?;
    Ok((d, dtype))
}

/// Packs 2-bit codes, four per byte, code `i` in bits `2i..2i+2`.
fn pack_codes(codes: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; codes.len().div_ceil(4)];
    for (i, &c) in codes.iter().enumerate() {
        out[i / 4] |= (c & 0b11) << (2 * (i % 4));
    }
    out
}

fn unpack_codes(packed: &[u8], count: usize) -> Vec<u8> {
    (0..count)
        .map(|i| (packed[i / 4] >> (2 * (i % 4))) & 0b11)
        .collect()
}

pub fn write_vnm<W: Write>(w: &mut W, s: &VnmMatrix) -> Result<()> {
    w.write_all(VNM_MAGIC)?;
    write_u32(w, VNM_VERSION)?;
    write_u32(w, s.r() as u32)?;
    write_u32(w, s.k() as u32)?;
    write_u32(w, s.cfg().v as u32)?;
    write_u32(w, s.cfg().n as u32)?;
    write_u32(w, s.cfg().m as u32)?;
    w.write_all(&[s.dtype().to_u8()])?;
    for v in s.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&pack_codes(s.m_indices()))?;
    for c in s.column_loc() {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vnm<R: Read>(r: &mut R) -> Result<VnmMatrix> {
    expect_magic(r, VNM_MAGIC, "VNM1")?;
    let version = read_u32(r)?;
    if version != VNM_VERSION {
        return Err(Error::InvalidContainer {
            context: format!("unsupported VNM1 version {version}"),
        });
    }
    let rr = read_u32(r)?;
    let kk = read_u32(r)?;
    let v = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let m = read_u32(r)? as usize;
    let (rows, k) = checked_dims(rr, kk, "VNM1")?;
    let cfg = VnmConfig::new(v, n, m);
    if v == 0 || m == 0 || n == 0 || rows % v != 0 || k % m != 0 {
        return Err(Error::InvalidContainer {
            context: format!("VNM1 header {rows}x{k} incompatible with pattern {cfg}"),
        });
    }
    let dtype = Dtype::from_u8(read_u8(r)?)?;
    let nvals = rows * (k / m) * n;
    let nloc = (rows / v) * (k / m) * SELECTED_COLUMNS;

    let mut values = vec![0f32; nvals];
    let mut buf = [0u8; 4];
    for vref in values.iter_mut() {
        r.read_exact(&mut buf)?;
        *vref = f32::from_le_bytes(buf);
    }
    let mut packed = vec![0u8; nvals.div_ceil(4)];
    r.read_exact(&mut packed)?;
    let m_indices = unpack_codes(&packed, nvals);
    let mut column_loc = vec![0u16; nloc];
    let mut b2 = [0u8; 2];
    for c in column_loc.iter_mut() {
        r.read_exact(&mut b2)?;
        *c = u16::from_le_bytes(b2);
    }
    VnmMatrix::from_parts(rows, k, cfg, dtype, values, m_indices, column_loc)
}

pub fn write_mask<W: Write>(w: &mut W, mask: &SparsityMask) -> Result<()> {
    w.write_all(MSK_MAGIC)?;
    write_u32(w, mask.rows() as u32)?;
    write_u32(w, mask.cols() as u32)?;
    let bits = mask.keep();
    let mut packed = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&packed)?;
    Ok(())
}

pub fn read_mask<R: Read>(r: &mut R) -> Result<SparsityMask> {
    expect_magic(r, MSK_MAGIC, "MSK1")?;
    let rows = read_u32(r)?;
    let cols = read_u32(r)?;
    let (rows, cols) = checked_dims(rows, cols, "MSK1")?;
    let total = rows * cols;
    let mut packed = vec![0u8; total.div_ceil(8)];
    r.read_exact(&mut packed)?;
    let keep = (0..total)
        .map(|i| (packed[i / 8] >> (i % 8)) & 1 == 1)
        .collect();
    SparsityMask::new(rows, cols, keep)
}

/// Serialized sizes of the three VNM1 payload structures, in bytes.
/// Matches the container layout exactly.
pub fn vnm_structure_bytes(r: usize, k: usize, cfg: &VnmConfig) -> (usize, usize, usize) {
    let nvals = r * (k / cfg.m) * cfg.n;
    let nloc = (r / cfg.v) * (k / cfg.m) * SELECTED_COLUMNS;
    (nvals * 4, nvals.div_ceil(4), nloc * 2)
}
