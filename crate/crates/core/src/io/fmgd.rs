//! FMGD grid files, little-endian:
//!
//! ```text
//! "FMGD"  u32 version = 1  u32 nx ny nz  f64 min[3] max[3]  f32 values[nx·ny·nz]
//! ```
//!
//! Values are x-fastest, then y, then z.

use std::path::Path;

use crate::field::{Bbox, GridField};
use crate::{Error, Result, Vec3};

pub const FMGD_MAGIC: &[u8; 4] = b"FMGD";
pub const FMGD_VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 12 + 48;

pub fn write_grid_bytes(grid: &GridField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 4 * grid.values().len());
    out.extend_from_slice(FMGD_MAGIC);
    out.extend_from_slice(&FMGD_VERSION.to_le_bytes());
    for d in grid.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for c in grid.bbox().min.iter().chain(grid.bbox().max.iter()) {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_grid_bytes(bytes: &[u8]) -> Result<GridField> {
    if bytes.len() < HEADER {
        return Err(Error::Length {
            expected: HEADER,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != FMGD_MAGIC {
        return Err(Error::Format("not an FMGD file (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FMGD_VERSION {
        return Err(Error::Format(format!("unsupported FMGD version {version}")));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let min = Vec3::new(f64_at(20), f64_at(28), f64_at(36));
    let max = Vec3::new(f64_at(44), f64_at(52), f64_at(60));
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("grid dimensions overflow".into()))?;
    let expected = HEADER + 4 * count;
    if bytes.len() != expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let values = bytes[HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridField::new(dims, Bbox::new(min, max), values)
}

pub fn write_grid(path: impl AsRef<Path>, grid: &GridField) -> Result<()> {
    std::fs::write(path, write_grid_bytes(grid))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<GridField> {
    read_grid_bytes(&std::fs::read(path)?)
}
