//! Binary density-field format: magic `GICF`, `u32` dims, `f64` origin,
//! `f64` cell size, then `f32` values with z fastest, all little-endian.

use std::fs;
use std::path::Path;

use crate::error::{GicError, Result};
use crate::geometry::DensityField;
use crate::Vec3;

const MAGIC: &[u8; 4] = b"GICF";
const HEADER_LEN: usize = 4 + 3 * 4 + 3 * 8 + 8;

pub fn encode_field(field: &DensityField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * field.values.len());
    out.extend(MAGIC);
    for d in field.dims {
        out.extend((d as u32).to_le_bytes());
    }
    for a in 0..3 {
        out.extend(field.origin[a].to_le_bytes());
    }
    out.extend(field.cell_size.to_le_bytes());
    for v in &field.values {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn parse_field(bytes: &[u8], source: &str) -> Result<DensityField> {
    let err = |location: &str, message: &str| GicError::Parse {
        source_name: source.to_string(),
        location: location.to_string(),
        message: message.to_string(),
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(err("byte 0", "missing GICF header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let dims = [u32_at(4), u32_at(8), u32_at(12)];
    let origin = Vec3::new(f64_at(16), f64_at(24), f64_at(32));
    let cell = f64_at(40);
    let n = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| err("byte 4", "dims overflow"))?;
    if bytes.len() != HEADER_LEN + 4 * n {
        return Err(err(
            &format!("byte {HEADER_LEN}"),
            &format!("expected {} value bytes, found {}", 4 * n, bytes.len() - HEADER_LEN),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    DensityField::from_values(origin, cell, dims, values).map_err(|e| err("header", &e.to_string()))
}

pub fn write_field(path: impl AsRef<Path>, field: &DensityField) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(field)).map_err(|e| GicError::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| GicError::io(path, e))?;
    parse_field(&bytes, &path.display().to_string())
}
