//! PLY point clouds, ASCII or binary little-endian.
//!
//! Only the `x`, `y`, `z` properties of the `vertex` element are kept on read;
//! every other property and element is parsed and skipped. The writer emits a
//! fixed header with exactly those three `float` properties.

use std::path::Path;

use super::codec::{CodecError, CodecResult};
use super::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn ply_err(offset: usize, detail: impl Into<String>) -> CodecError {
    CodecError::Ply { offset: offset as u64, detail: detail.into() }
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body: usize,
}

fn parse_header(bytes: &[u8]) -> CodecResult<Header> {
    if !bytes.starts_with(b"ply\n") && !bytes.starts_with(b"ply\r\n") {
        return Err(CodecError::BadMagic {
            offset: 0,
            expected: "ply".into(),
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
        });
    }
    let mut pos = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line_start = pos;
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ply_err(pos, "header is not terminated by end_header"))?;
        pos += nl + 1;
        let line = std::str::from_utf8(&bytes[line_start..pos - 1])
            .map_err(|_| ply_err(line_start, "header is not valid ASCII"))?
            .trim_end_matches('\r');
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") if line_start == 0 => {}
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                format = Some(match (tok.next(), tok.next()) {
                    (Some("ascii"), Some("1.0")) => PlyFormat::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyFormat::BinaryLittleEndian,
                    (Some(f), _) => return Err(ply_err(line_start, format!("unsupported format {f:?}"))),
                    _ => return Err(ply_err(line_start, "incomplete format line")),
                })
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| ply_err(line_start, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| ply_err(line_start, "element count is not an integer"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ply_err(line_start, "property before any element"))?;
                let words: Vec<&str> = tok.collect();
                let prop = match words.as_slice() {
                    ["list", count, item, _name] => Property::List {
                        count: Scalar::parse(count).ok_or_else(|| ply_err(line_start, "bad list count type"))?,
                        item: Scalar::parse(item).ok_or_else(|| ply_err(line_start, "bad list item type"))?,
                    },
                    [ty, name] => Property::Scalar {
                        name: name.to_string(),
                        ty: Scalar::parse(ty)
                            .ok_or_else(|| ply_err(line_start, format!("unknown property type {ty:?}")))?,
                    },
                    _ => return Err(ply_err(line_start, "malformed property line")),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(ply_err(line_start, format!("unexpected header keyword {other:?}"))),
        }
    }
    let format = format.ok_or_else(|| ply_err(0, "missing format line"))?;
    Ok(Header { format, elements, body: pos })
}

/// Column positions of x, y, z within the vertex element.
fn xyz_slots(el: &Element) -> CodecResult<[usize; 3]> {
    let find = |axis: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
            .ok_or_else(|| ply_err(0, format!("vertex element lacks property {axis}")))
    };
    Ok([find("x")?, find("y")?, find("z")?])
}

pub fn decode_ply(bytes: &[u8]) -> CodecResult<PointCloud> {
    let header = parse_header(bytes)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| ply_err(0, "no vertex element"))?;
    let slots = xyz_slots(&header.elements[vertex_idx])?;
    let positions = match header.format {
        PlyFormat::BinaryLittleEndian => read_binary(bytes, &header, vertex_idx, slots)?,
        PlyFormat::Ascii => read_ascii(bytes, &header, vertex_idx, slots)?,
    };
    PointCloud::new(positions).map_err(|e| ply_err(header.body, e.to_string()))
}

fn read_binary(bytes: &[u8], header: &Header, vertex_idx: usize, slots: [usize; 3]) -> CodecResult<Vec<[f32; 3]>> {
    let mut pos = header.body;
    let take = |pos: &mut usize, n: usize| -> CodecResult<&[u8]> {
        if bytes.len() - *pos < n {
            return Err(CodecError::Truncated {
                offset: *pos as u64,
                needed: (n - (bytes.len() - *pos)) as u64,
            });
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let mut positions = Vec::new();
    for (ei, el) in header.elements.iter().enumerate() {
        if ei == vertex_idx {
            let min_row: usize = el
                .props
                .iter()
                .map(|p| match p {
                    Property::Scalar { ty, .. } => ty.size(),
                    Property::List { count, .. } => count.size(),
                })
                .sum();
            if el.count.saturating_mul(min_row) > bytes.len() - pos {
                return Err(CodecError::Truncated {
                    offset: pos as u64,
                    needed: (el.count.saturating_mul(min_row) - (bytes.len() - pos)) as u64,
                });
            }
            positions.reserve(el.count);
        }
        for _ in 0..el.count {
            let mut xyz = [0f32; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let at = pos;
                        let v = ty.read_le(take(&mut pos, ty.size())?);
                        if ei == vertex_idx {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                let v = v as f32;
                                if !v.is_finite() {
                                    return Err(CodecError::NonFinite { offset: at as u64 });
                                }
                                xyz[axis] = v;
                            }
                        }
                    }
                    Property::List { count, item } => {
                        let at = pos;
                        let n = count.read_le(take(&mut pos, count.size())?);
                        if n < 0.0 {
                            return Err(ply_err(at, "negative list length"));
                        }
                        take(&mut pos, n as usize * item.size())?;
                    }
                }
            }
            if ei == vertex_idx {
                positions.push(xyz);
            }
        }
    }
    if pos != bytes.len() {
        return Err(CodecError::TrailingBytes {
            offset: pos as u64,
            count: (bytes.len() - pos) as u64,
        });
    }
    Ok(positions)
}

fn read_ascii(bytes: &[u8], header: &Header, vertex_idx: usize, slots: [usize; 3]) -> CodecResult<Vec<[f32; 3]>> {
    let body = &bytes[header.body..];
    let text = std::str::from_utf8(body).map_err(|e| ply_err(header.body + e.valid_up_to(), "body is not ASCII"))?;
    let mut lines = text
        .split_inclusive('\n')
        .scan(header.body, |off, l| {
            let start = *off;
            *off += l.len();
            Some((start, l))
        })
        .filter(|(_, l)| !l.trim().is_empty());
    let mut positions = Vec::new();
    for (ei, el) in header.elements.iter().enumerate() {
        for row in 0..el.count {
            let (at, line) = lines
                .next()
                .ok_or_else(|| CodecError::Truncated { offset: bytes.len() as u64, needed: 1 })?;
            let mut tok = line.split_whitespace();
            let mut next = || -> CodecResult<f64> {
                tok.next()
                    .ok_or_else(|| ply_err(at, format!("{} row {row} has too few values", el.name)))?
                    .parse::<f64>()
                    .map_err(|_| ply_err(at, format!("{} row {row} has a non-numeric value", el.name)))
            };
            let mut xyz = [0f32; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { .. } => {
                        let v = next()?;
                        if ei == vertex_idx {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                let v = v as f32;
                                if !v.is_finite() {
                                    return Err(CodecError::NonFinite { offset: at as u64 });
                                }
                                xyz[axis] = v;
                            }
                        }
                    }
                    Property::List { .. } => {
                        let n = next()?;
                        for _ in 0..n as usize {
                            next()?;
                        }
                    }
                }
            }
            if ei == vertex_idx {
                positions.push(xyz);
            }
        }
    }
    if let Some((at, _)) = lines.next() {
        return Err(CodecError::TrailingBytes {
            offset: at as u64,
            count: (bytes.len() - at) as u64,
        });
    }
    Ok(positions)
}

fn header_text(format: PlyFormat, n: usize, colored: bool) -> String {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut h = format!("ply\nformat {fmt} 1.0\nelement vertex {n}\nproperty float x\nproperty float y\nproperty float z\n");
    if colored {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    h.push_str("end_header\n");
    h
}

pub fn encode_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    encode_inner(cloud, None, format)
}

/// Writes positions plus one RGB triple per point (binary little-endian).
pub fn encode_colored_ply(cloud: &PointCloud, colors: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(cloud.len(), colors.len(), "one color per point");
    encode_inner(cloud, Some(colors), PlyFormat::BinaryLittleEndian)
}

fn encode_inner(cloud: &PointCloud, colors: Option<&[[u8; 3]]>, format: PlyFormat) -> Vec<u8> {
    let mut out = header_text(format, cloud.len(), colors.is_some()).into_bytes();
    match format {
        PlyFormat::BinaryLittleEndian => {
            out.reserve(cloud.len() * 15);
            for (i, p) in cloud.positions().iter().enumerate() {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(colors) = colors {
                    out.extend_from_slice(&colors[i]);
                }
            }
        }
        PlyFormat::Ascii => {
            use std::fmt::Write;
            let mut s = String::new();
            for (i, p) in cloud.positions().iter().enumerate() {
                let _ = write!(s, "{} {} {}", p[0], p[1], p[2]);
                if let Some(colors) = colors {
                    let [r, g, b] = colors[i];
                    let _ = write!(s, " {r} {g} {b}");
                }
                s.push('\n');
            }
            out.extend_from_slice(s.as_bytes());
        }
    }
    out
}

pub fn load_ply(path: impl AsRef<Path>) -> crate::Result<PointCloud> {
    Ok(decode_ply(&std::fs::read(path)?)?)
}

pub fn save_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> crate::Result<()> {
    std::fs::write(path, encode_ply(cloud, PlyFormat::BinaryLittleEndian))?;
    Ok(())
}
