use std::path::Path;

use wnorient_core::geometry::Vec3;
use wnorient_core::Point3;

use super::{finite_point, parse_error, unit_normal, CloudData};
use crate::CliError;

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
    fn parse(name: &str) -> Option<Scalar> {
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

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// Number of header lines, for error messages about the body.
    lines: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, CliError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_error(path, line_no + 1, "header is not terminated by end_header"));
        };
        let raw = &bytes[pos..pos + len];
        pos += len + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_error(path, line_no, "header is not ASCII"))?
            .trim();
        let tok: Vec<&str> = line.split_whitespace().collect();
        let bad = |m: &str| Err(parse_error(path, line_no, m));
        if line_no == 1 {
            if line != "ply" {
                return bad("missing ply magic");
            }
            continue;
        }
        match tok.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match tok.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some(other) => return bad(&format!("unsupported format {other}")),
                    None => return bad("format needs a value"),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) else {
                    return bad("malformed element line");
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return bad("property before any element");
                };
                let prop = match tok.as_slice() {
                    ["property", "list", c, t, _] => match (Scalar::parse(c), Scalar::parse(t)) {
                        (Some(c), Some(t)) => Property::List(c, t),
                        _ => return bad("unknown list property type"),
                    },
                    ["property", t, name] => match Scalar::parse(t) {
                        Some(t) => Property::Scalar(t, name.to_string()),
                        None => return bad(&format!("unknown property type {t}")),
                    },
                    _ => return bad("malformed property line"),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return bad(&format!("unexpected header keyword {other}")),
        }
    }
    let Some(encoding) = encoding else {
        return Err(parse_error(path, line_no, "header has no format line"));
    };
    Ok(Header {
        encoding,
        elements,
        body: pos,
        lines: line_no,
    })
}

/// Column of each wanted property in a vertex record.
struct Layout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

fn vertex_layout(path: &Path, el: &Element, header_lines: usize) -> Result<Layout, CliError> {
    let find = |want: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar(_, n) if n == want))
    };
    let (Some(x), Some(y), Some(z)) = (find("x"), find("y"), find("z")) else {
        return Err(parse_error(path, header_lines, "vertex element lacks x, y, z"));
    };
    let normal = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => return Err(parse_error(path, header_lines, "vertex element has partial normals")),
    };
    Ok(Layout { xyz: [x, y, z], normal })
}

fn push_vertex(path: &Path, line: usize, layout: &Layout, vals: &[f64], out: &mut CloudData) -> Result<(), CliError> {
    let pick = |ix: [usize; 3]| [vals[ix[0]], vals[ix[1]], vals[ix[2]]];
    out.points.push(finite_point(path, line, pick(layout.xyz))?);
    if let (Some(ix), Some(normals)) = (layout.normal, out.normals.as_mut()) {
        normals.push(unit_normal(path, line, pick(ix))?);
    }
    Ok(())
}

pub(super) fn parse(path: &Path, bytes: &[u8]) -> Result<CloudData, CliError> {
    let header = parse_header(path, bytes)?;
    let Some(vi) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(parse_error(path, header.lines, "no vertex element"));
    };
    let layout = vertex_layout(path, &header.elements[vi], header.lines)?;
    let mut out = CloudData {
        points: Vec::with_capacity(header.elements[vi].count),
        normals: layout.normal.map(|_| Vec::new()),
    };
    let body = &bytes[header.body..];
    match header.encoding {
        Encoding::Ascii => parse_ascii(path, &header, vi, &layout, body, &mut out)?,
        Encoding::BinaryLe => parse_binary(path, &header, vi, &layout, body, &mut out)?,
    }
    Ok(out)
}

fn parse_ascii(
    path: &Path,
    header: &Header,
    vi: usize,
    layout: &Layout,
    body: &[u8],
    out: &mut CloudData,
) -> Result<(), CliError> {
    let text = std::str::from_utf8(body).map_err(|_| parse_error(path, header.lines + 1, "body is not ASCII"))?;
    let mut lines = text.lines().enumerate().map(|(k, l)| (header.lines + 1 + k, l));
    let mut vals = Vec::new();
    for el in &header.elements[..=vi] {
        for _ in 0..el.count {
            let (line, l) = loop {
                match lines.next() {
                    Some((_, l)) if l.trim().is_empty() => continue,
                    Some(x) => break x,
                    None => return Err(parse_error(path, header.lines, format!("too few {} records", el.name))),
                }
            };
            if el.name != "vertex" {
                continue;
            }
            let mut tok = l.split_whitespace();
            let mut next = || -> Result<f64, CliError> {
                let t = tok.next().ok_or_else(|| parse_error(path, line, "record too short"))?;
                t.parse()
                    .map_err(|_| parse_error(path, line, format!("bad number {t:?}")))
            };
            vals.clear();
            for p in &el.props {
                match p {
                    Property::Scalar(..) => vals.push(next()?),
                    Property::List(..) => {
                        let n = next()?;
                        for _ in 0..n as usize {
                            next()?;
                        }
                        vals.push(f64::NAN);
                    }
                }
            }
            push_vertex(path, line, layout, &vals, out)?;
        }
    }
    Ok(())
}

fn parse_binary(
    path: &Path,
    header: &Header,
    vi: usize,
    layout: &Layout,
    body: &[u8],
    out: &mut CloudData,
) -> Result<(), CliError> {
    let mut pos = 0;
    let mut take = |n: usize, rec: usize, name: &str| -> Result<&[u8], CliError> {
        let s = body
            .get(pos..pos + n)
            .ok_or_else(|| parse_error(path, header.lines, format!("truncated body in {name} record {rec}")))?;
        pos += n;
        Ok(s)
    };
    let mut vals = Vec::new();
    for el in &header.elements[..=vi] {
        for rec in 0..el.count {
            vals.clear();
            for p in &el.props {
                match *p {
                    Property::Scalar(t, _) => vals.push(t.decode_le(take(t.size(), rec, &el.name)?)),
                    Property::List(c, t) => {
                        let n = c.decode_le(take(c.size(), rec, &el.name)?);
                        take(n as usize * t.size(), rec, &el.name)?;
                        vals.push(f64::NAN);
                    }
                }
            }
            if el.name == "vertex" {
                // Binary records have no line numbers; report the record index.
                push_vertex(path, rec, layout, &vals, out)?;
            }
        }
    }
    Ok(())
}

/// ASCII PLY with double-precision positions and normals.
pub(super) fn encode(points: &[Point3], normals: &[Vec3]) -> Vec<u8> {
    let mut out = String::with_capacity(160 + points.len() * 96);
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", points.len()));
    for name in ["x", "y", "z", "nx", "ny", "nz"] {
        out.push_str(&format!("property double {name}\n"));
    }
    out.push_str("end_header\n");
    out.push_str(std::str::from_utf8(&super::xyz::encode(points, normals)).unwrap());
    out.into_bytes()
}
