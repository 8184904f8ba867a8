//! Binary run-length mask format.
//!
//! Layout (little endian):
//!
//! ```text
//! b"MTPM1"            magic and format version
//! u32 dim
//! u32 resolution
//! u64 run count
//! per run: u128 start, u128 length   (Morton keys of level-L cells)
//! ```

use std::io::{Read, Write};

use super::mask::CubeMask;
use crate::error::{MtpError, Result};

pub const MASK_MAGIC: &[u8; 5] = b"MTPM1";

pub fn write_mask_binary<W: Write>(mask: &CubeMask, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| MtpError::Invalid(format!("write failed: {e}"));
    w.write_all(MASK_MAGIC).map_err(io)?;
    w.write_all(&(mask.dim() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&mask.resolution().to_le_bytes()).map_err(io)?;
    w.write_all(&(mask.runs().len() as u64).to_le_bytes()).map_err(io)?;
    for &(s, e) in mask.runs() {
        w.write_all(&s.to_le_bytes()).map_err(io)?;
        w.write_all(&(e - s).to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_mask_binary<R: Read>(mut r: R) -> Result<CubeMask> {
    let io = |e: std::io::Error| MtpError::Invalid(format!("read failed: {e}"));
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MASK_MAGIC {
        return Err(MtpError::Invalid("not an MTPM1 mask".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(io)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(io)?;
    let resolution = u32::from_le_bytes(b4);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8);
    let empty = CubeMask::empty(dim, resolution)?;
    let total = empty.total_cells();
    let mut runs = Vec::with_capacity(n.min(1 << 20) as usize);
    let mut b16 = [0u8; 16];
    let mut prev_end = 0u128;
    for _ in 0..n {
        r.read_exact(&mut b16).map_err(io)?;
        let s = u128::from_le_bytes(b16);
        r.read_exact(&mut b16).map_err(io)?;
        let len = u128::from_le_bytes(b16);
        let e = s.checked_add(len).filter(|&e| e <= total && len > 0 && s >= prev_end);
        let e = e.ok_or_else(|| MtpError::Invalid("corrupt run table".into()))?;
        prev_end = e;
        runs.push((s, e));
    }
    Ok(CubeMask::from_sorted_runs(dim, resolution, runs))
}
