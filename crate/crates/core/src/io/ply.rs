//! PLY reading and writing for Gaussian point sets, GIC particle sets and
//! trajectory frames.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{GicError, Result};
use crate::geometry::{GaussianPoint, GaussianPointSet, GicParticle, GicParticleSet};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scalar::I8 => "char",
            Scalar::U8 => "uchar",
            Scalar::I16 => "short",
            Scalar::U16 => "ushort",
            Scalar::I32 => "int",
            Scalar::U32 => "uint",
            Scalar::F32 => "float",
            Scalar::F64 => "double",
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            Scalar::I8 => out.push(v as i8 as u8),
            Scalar::U8 => out.push(v as u8),
            Scalar::I16 => out.extend((v as i16).to_le_bytes()),
            Scalar::U16 => out.extend((v as u16).to_le_bytes()),
            Scalar::I32 => out.extend((v as i32).to_le_bytes()),
            Scalar::U32 => out.extend((v as u32).to_le_bytes()),
            Scalar::F32 => out.extend((v as f32).to_le_bytes()),
            Scalar::F64 => out.extend(v.to_le_bytes()),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
}

/// Column-oriented contents of a PLY `vertex` element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyTable {
    pub len: usize,
    pub columns: HashMap<String, Vec<f64>>,
}

impl PlyTable {
    pub fn column(&self, name: &str, source: &str) -> Result<&[f64]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| GicError::Parse {
            source_name: source.to_string(),
            location: "header".into(),
            message: format!("missing vertex property `{name}`"),
        })
    }
}

fn parse_err(source: &str, location: impl Into<String>, message: impl Into<String>) -> GicError {
    GicError::Parse {
        source_name: source.to_string(),
        location: location.into(),
        message: message.into(),
    }
}

/// Parses the `vertex` element of an ASCII or binary little-endian PLY.
pub fn parse_ply(bytes: &[u8], source: &str) -> Result<PlyTable> {
    let end = find_header_end(bytes).ok_or_else(|| parse_err(source, "header", "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end.0]).map_err(|_| parse_err(source, "header", "header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(parse_err(source, "line 1", "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (n, line) in lines.enumerate() {
        let loc = format!("header line {}", n + 2);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(parse_err(source, loc, format!("unsupported format `{other}`"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(source, &loc, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ..] => {
                return Err(parse_err(source, loc, "list properties are not supported"));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| parse_err(source, &loc, format!("unknown type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(source, &loc, "property before element"))?
                    .props
                    .push((name.to_string(), ty));
            }
            _ => return Err(parse_err(source, loc, format!("unrecognized header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| parse_err(source, "header", "missing format line"))?;
    let body = &bytes[end.1..];
    let mut table = PlyTable::default();
    match format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| parse_err(source, "body", "body is not UTF-8"))?;
            let mut rows = text.lines().filter(|l| !l.trim().is_empty());
            let mut row_no = 0;
            for el in &elements {
                let mut cols = vec![Vec::with_capacity(el.count); el.props.len()];
                for _ in 0..el.count {
                    row_no += 1;
                    let loc = format!("body row {row_no}");
                    let row = rows.next().ok_or_else(|| parse_err(source, &loc, "unexpected end of data"))?;
                    let vals: Vec<&str> = row.split_whitespace().collect();
                    if vals.len() != el.props.len() {
                        return Err(parse_err(source, loc, format!("expected {} values, found {}", el.props.len(), vals.len())));
                    }
                    for ((c, v), (_, ty)) in cols.iter_mut().zip(vals).zip(&el.props) {
                        let x = v.parse::<f64>().map_err(|_| parse_err(source, &loc, format!("bad number `{v}`")))?;
                        // match the precision a binary file would carry
                        c.push(if *ty == Scalar::F32 { x as f32 as f64 } else { x });
                    }
                }
                if el.name == "vertex" {
                    table.len = el.count;
                    table.columns = el.props.iter().map(|p| p.0.clone()).zip(cols).collect();
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut off = 0usize;
            for el in &elements {
                let stride: usize = el.props.iter().map(|p| p.1.size()).sum();
                let need = stride * el.count;
                if body.len() < off + need {
                    return Err(parse_err(source, format!("byte {}", end.1 + body.len()), format!("truncated `{}` element", el.name)));
                }
                if el.name == "vertex" {
                    let mut cols = vec![Vec::with_capacity(el.count); el.props.len()];
                    for r in 0..el.count {
                        let mut at = off + r * stride;
                        for (c, (_, ty)) in cols.iter_mut().zip(&el.props) {
                            c.push(ty.decode(&body[at..]));
                            at += ty.size();
                        }
                    }
                    table.len = el.count;
                    table.columns = el.props.iter().map(|p| p.0.clone()).zip(cols).collect();
                }
                off += need;
            }
        }
    }
    if !elements.iter().any(|e| e.name == "vertex") {
        return Err(parse_err(source, "header", "no vertex element"));
    }
    Ok(table)
}

/// Returns (header length up to the terminator, body start).
fn find_header_end(bytes: &[u8]) -> Option<(usize, usize)> {
    let key = b"end_header";
    let pos = bytes.windows(key.len()).position(|w| w == key)?;
    let mut body = pos + key.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    Some((pos + key.len(), body))
}

/// Serializes a vertex table with the given property layout.
fn encode_ply(props: &[(&str, Scalar)], rows: usize, value: impl Fn(usize, usize) -> f64, format: PlyFormat) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    out.extend(format!("ply\nformat {fmt} 1.0\nelement vertex {rows}\n").bytes());
    for (name, ty) in props {
        out.extend(format!("property {} {name}\n", ty.name()).bytes());
    }
    out.extend(b"end_header\n");
    for r in 0..rows {
        match format {
            PlyFormat::Ascii => {
                let row: Vec<String> = props
                    .iter()
                    .enumerate()
                    .map(|(c, (_, ty))| match ty {
                        Scalar::F32 => format!("{}", value(r, c) as f32),
                        Scalar::F64 => format!("{}", value(r, c)),
                        _ => format!("{}", value(r, c) as i64),
                    })
                    .collect();
                out.extend(row.join(" ").bytes());
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for (c, (_, ty)) in props.iter().enumerate() {
                    ty.encode(value(r, c), &mut out);
                }
            }
        }
    }
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| GicError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| GicError::io(path, e))
}

fn color_to_u8(c: f64) -> f64 {
    (c.clamp(0.0, 1.0) * 255.0).round()
}

const GAUSSIAN_LAYOUT: [(&str, Scalar); 8] = [
    ("x", Scalar::F32),
    ("y", Scalar::F32),
    ("z", Scalar::F32),
    ("scale", Scalar::F32),
    ("opacity", Scalar::F32),
    ("red", Scalar::U8),
    ("green", Scalar::U8),
    ("blue", Scalar::U8),
];

pub fn parse_gaussian_ply(bytes: &[u8], source: &str) -> Result<GaussianPointSet> {
    let t = parse_ply(bytes, source)?;
    let cols: Vec<&[f64]> = GAUSSIAN_LAYOUT
        .iter()
        .map(|(n, _)| t.column(n, source))
        .collect::<Result<_>>()?;
    let points = (0..t.len)
        .map(|i| {
            GaussianPoint::new(
                Vec3::new(cols[0][i], cols[1][i], cols[2][i]),
                cols[3][i],
                cols[4][i],
                [cols[5][i] / 255.0, cols[6][i] / 255.0, cols[7][i] / 255.0],
            )
        })
        .collect();
    let set = GaussianPointSet::new(points);
    set.validate().map_err(|e| parse_err(source, "body", e.to_string()))?;
    Ok(set)
}

pub fn read_gaussian_ply(path: impl AsRef<Path>) -> Result<GaussianPointSet> {
    let path = path.as_ref();
    parse_gaussian_ply(&read_file(path)?, &path.display().to_string())
}

pub fn encode_gaussian_ply(set: &GaussianPointSet, format: PlyFormat) -> Vec<u8> {
    encode_ply(
        &GAUSSIAN_LAYOUT,
        set.len(),
        |r, c| {
            let p = &set.points[r];
            match c {
                0..=2 => p.center[c],
                3 => p.scale,
                4 => p.opacity,
                _ => color_to_u8(p.color[c - 5]),
            }
        },
        format,
    )
}

pub fn write_gaussian_ply(path: impl AsRef<Path>, set: &GaussianPointSet, format: PlyFormat) -> Result<()> {
    write_file(path.as_ref(), &encode_gaussian_ply(set, format))
}

/// GIC particles share the Gaussian layout with white color.
pub fn encode_gic_ply(set: &GicParticleSet, format: PlyFormat) -> Vec<u8> {
    encode_ply(
        &GAUSSIAN_LAYOUT,
        set.len(),
        |r, c| {
            let p = &set.particles[r];
            match c {
                0..=2 => p.position[c],
                3 => p.scale,
                4 => p.opacity,
                _ => 255.0,
            }
        },
        format,
    )
}

pub fn write_gic_ply(path: impl AsRef<Path>, set: &GicParticleSet, format: PlyFormat) -> Result<()> {
    write_file(path.as_ref(), &encode_gic_ply(set, format))
}

pub fn parse_gic_ply(bytes: &[u8], source: &str) -> Result<GicParticleSet> {
    let t = parse_ply(bytes, source)?;
    let (x, y, z) = (t.column("x", source)?, t.column("y", source)?, t.column("z", source)?);
    let (s, o) = (t.column("scale", source)?, t.column("opacity", source)?);
    let particles = (0..t.len)
        .map(|i| GicParticle {
            position: Vec3::new(x[i], y[i], z[i]),
            scale: s[i],
            opacity: o[i],
        })
        .collect();
    Ok(GicParticleSet { particles })
}

pub fn read_gic_ply(path: impl AsRef<Path>) -> Result<GicParticleSet> {
    let path = path.as_ref();
    parse_gic_ply(&read_file(path)?, &path.display().to_string())
}

/// Plain point positions with an optional per-point surface flag.
pub fn encode_points_ply(points: &[Vec3], surface: Option<&[bool]>, format: PlyFormat) -> Vec<u8> {
    let mut layout = vec![("x", Scalar::F32), ("y", Scalar::F32), ("z", Scalar::F32)];
    if surface.is_some() {
        layout.push(("surface", Scalar::U8));
    }
    encode_ply(
        &layout,
        points.len(),
        |r, c| match c {
            0..=2 => points[r][c],
            _ => surface.map_or(0.0, |s| if s[r] { 1.0 } else { 0.0 }),
        },
        format,
    )
}

pub fn write_points_ply(path: impl AsRef<Path>, points: &[Vec3], surface: Option<&[bool]>, format: PlyFormat) -> Result<()> {
    write_file(path.as_ref(), &encode_points_ply(points, surface, format))
}

/// Reads positions and, when present, the surface flag.
pub fn read_points_ply(path: impl AsRef<Path>) -> Result<(Vec<Vec3>, Option<Vec<bool>>)> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let t = parse_ply(&read_file(path)?, &source)?;
    let (x, y, z) = (t.column("x", &source)?, t.column("y", &source)?, t.column("z", &source)?);
    let pts = (0..t.len).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
    let flags = t.columns.get("surface").map(|s| s.iter().map(|&v| v != 0.0).collect());
    Ok((pts, flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GaussianPointSet {
        GaussianPointSet::new(vec![
            GaussianPoint::new(Vec3::new(0.5, -1.25, 2.0), 0.01, 0.75, [1.0, 0.0, 128.0 / 255.0]),
            GaussianPoint::new(Vec3::new(3.0, 0.0, -0.5), 0.02, 1.0, [0.2, 0.4, 0.6]),
        ])
    }

    #[test]
    fn gaussian_round_trip_both_formats() {
        let set = sample();
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let back = parse_gaussian_ply(&encode_gaussian_ply(&set, fmt), "mem").unwrap();
            assert_eq!(back.len(), 2);
            for (a, b) in set.points.iter().zip(&back.points) {
                assert!((a.center - b.center).norm() < 1e-6);
                assert!((a.scale - b.scale).abs() < 1e-8);
                assert!((a.opacity - b.opacity).abs() < 1e-7);
                for c in 0..3 {
                    assert!((a.color[c] - b.color[c]).abs() <= 0.5 / 255.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn ascii_and_binary_agree() {
        let set = sample();
        let a = parse_gaussian_ply(&encode_gaussian_ply(&set, PlyFormat::Ascii), "a").unwrap();
        let b = parse_gaussian_ply(&encode_gaussian_ply(&set, PlyFormat::BinaryLittleEndian), "b").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_property_is_named() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
        let err = parse_gaussian_ply(text, "pts.ply").unwrap_err().to_string();
        assert!(err.contains("scale") && err.contains("pts.ply"), "{err}");
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut bytes = encode_gaussian_ply(&sample(), PlyFormat::BinaryLittleEndian);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(parse_gaussian_ply(&bytes, "t"), Err(GicError::Parse { .. })));
    }

    #[test]
    fn surface_flags_round_trip() {
        let pts = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::zeros()];
        let flags = [true, false];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.ply");
        write_points_ply(&p, &pts, Some(&flags), PlyFormat::BinaryLittleEndian).unwrap();
        let (back, f) = read_points_ply(&p).unwrap();
        assert_eq!(back, pts);
        assert_eq!(f.unwrap(), flags);
    }
}
