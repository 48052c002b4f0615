//! Netpbm masks and colors, and PFM depth maps.

use std::fs;
use std::path::Path;

use crate::error::{GicError, Result};

/// Finite stand-in for +infinity in PFM depth maps.
pub const PFM_INFINITY: f32 = 3.4e38;

fn parse_err(source: &str, message: impl Into<String>) -> GicError {
    GicError::Parse {
        source_name: source.to_string(),
        location: "header".into(),
        message: message.into(),
    }
}

/// Splits a Netpbm-style header into `count` whitespace-separated tokens,
/// skipping `#` comments. Returns the tokens and the offset of the payload.
fn header_tokens(bytes: &[u8], count: usize, source: &str) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(parse_err(source, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates header and payload
    Ok((tokens, i + 1))
}

fn dims(tokens: &[String], source: &str) -> Result<(usize, usize)> {
    let w = tokens[1].parse().map_err(|_| parse_err(source, "bad width"))?;
    let h = tokens[2].parse().map_err(|_| parse_err(source, "bad height"))?;
    Ok((w, h))
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| to_u8(v)));
    out
}

/// Decodes an 8-bit P5 image into values in [0, 1].
pub fn parse_pgm(bytes: &[u8], source: &str) -> Result<(usize, usize, Vec<f64>)> {
    let (t, off) = header_tokens(bytes, 4, source)?;
    if t[0] != "P5" {
        return Err(parse_err(source, format!("expected P5, found `{}`", t[0])));
    }
    let (w, h) = dims(&t, source)?;
    let max: f64 = t[3].parse().map_err(|_| parse_err(source, "bad maxval"))?;
    if !(1.0..=255.0).contains(&max) {
        return Err(parse_err(source, "only 8-bit PGM is supported"));
    }
    let data = bytes.get(off..off + w * h).ok_or_else(|| parse_err(source, "truncated pixel data"))?;
    Ok((w, h, data.iter().map(|&b| b as f64 / max).collect()))
}

pub fn encode_ppm(width: usize, height: usize, colors: &[[f64; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for c in colors {
        out.extend(c.iter().map(|&v| to_u8(v)));
    }
    out
}

pub fn parse_ppm(bytes: &[u8], source: &str) -> Result<(usize, usize, Vec<[f64; 3]>)> {
    let (t, off) = header_tokens(bytes, 4, source)?;
    if t[0] != "P6" {
        return Err(parse_err(source, format!("expected P6, found `{}`", t[0])));
    }
    let (w, h) = dims(&t, source)?;
    let max: f64 = t[3].parse().map_err(|_| parse_err(source, "bad maxval"))?;
    if !(1.0..=255.0).contains(&max) {
        return Err(parse_err(source, "only 8-bit PPM is supported"));
    }
    let data = bytes.get(off..off + 3 * w * h).ok_or_else(|| parse_err(source, "truncated pixel data"))?;
    Ok((
        w,
        h,
        data.chunks_exact(3)
            .map(|p| [p[0] as f64 / max, p[1] as f64 / max, p[2] as f64 / max])
            .collect(),
    ))
}

/// Grayscale little-endian PFM. Rows are stored bottom to top as the
/// format requires; `values` is top to bottom.
pub fn encode_pfm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for row in (0..height).rev() {
        for &v in &values[row * width..(row + 1) * width] {
            let f = if v.is_infinite() && v > 0.0 { PFM_INFINITY } else { v as f32 };
            out.extend(f.to_le_bytes());
        }
    }
    out
}

pub fn parse_pfm(bytes: &[u8], source: &str) -> Result<(usize, usize, Vec<f64>)> {
    let (t, off) = header_tokens(bytes, 4, source)?;
    if t[0] != "Pf" {
        return Err(parse_err(source, format!("expected grayscale Pf, found `{}`", t[0])));
    }
    let (w, h) = dims(&t, source)?;
    let scale: f64 = t[3].parse().map_err(|_| parse_err(source, "bad scale"))?;
    if scale >= 0.0 {
        return Err(parse_err(source, "big-endian PFM is not supported"));
    }
    let data = bytes.get(off..off + 4 * w * h).ok_or_else(|| parse_err(source, "truncated pixel data"))?;
    let mut out = vec![0.0; w * h];
    for (k, b) in data.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let (file_row, col) = (k / w, k % w);
        out[(h - 1 - file_row) * w + col] = if v >= PFM_INFINITY { f64::INFINITY } else { v as f64 };
    }
    Ok((w, h, out))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| GicError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| GicError::io(path, e))
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    write(path.as_ref(), &encode_pgm(width, height, values))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    parse_pgm(&read(path)?, &path.display().to_string())
}

pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, colors: &[[f64; 3]]) -> Result<()> {
    write(path.as_ref(), &encode_ppm(width, height, colors))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<[f64; 3]>)> {
    let path = path.as_ref();
    parse_ppm(&read(path)?, &path.display().to_string())
}

pub fn write_pfm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    write(path.as_ref(), &encode_pfm(width, height, values))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    parse_pfm(&read(path)?, &path.display().to_string())
}
