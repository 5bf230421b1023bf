//! PLY reading (ASCII and binary) and ASCII writing.

use std::fmt::Write as _;

use crate::geometry::Vec3;

/// Vertex positions, optional per-vertex normals and polygon faces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyData {
    pub vertices: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub faces: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
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
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Parses PLY bytes. Errors carry a line number (ASCII) or byte offset.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyData, String> {
    let (format, elements, body_start) = parse_header(bytes)?;
    let mut reader = match format {
        Format::Ascii => Body::Ascii(AsciiBody::new(bytes, body_start)),
        Format::BinaryLe | Format::BinaryBe => Body::Binary {
            bytes,
            pos: body_start,
            big_endian: format == Format::BinaryBe,
        },
    };

    let mut data = PlyData::default();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let find = |n: &str| {
            el.props.iter().position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
        };
        let (xi, yi, zi) = (find("x"), find("y"), find("z"));
        let normal_idx = match (find("nx"), find("ny"), find("nz")) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        if is_vertex && (xi.is_none() || yi.is_none() || zi.is_none()) {
            return Err("vertex element lacks x/y/z properties".into());
        }
        if is_vertex && normal_idx.is_some() {
            data.normals = Some(Vec::with_capacity(el.count));
        }
        for _ in 0..el.count {
            reader.start_record()?;
            let mut scalars = vec![0.0; el.props.len()];
            let mut list: Option<Vec<usize>> = None;
            for (k, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => scalars[k] = reader.read(*ty)?,
                    Property::List { name, count, item } => {
                        let at = reader.location();
                        let n = reader.read(*count)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(format!("{at}: invalid list length {n}"));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            let at = reader.location();
                            let v = reader.read(*item)?;
                            if !(v >= 0.0 && v.fract() == 0.0) {
                                return Err(format!("{at}: invalid index {v}"));
                            }
                            items.push(v as usize);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            list = Some(items);
                        }
                    }
                }
            }
            reader.end_record()?;
            if is_vertex {
                let (x, y, z) = (xi.unwrap(), yi.unwrap(), zi.unwrap());
                data.vertices.push(Vec3::new(scalars[x], scalars[y], scalars[z]));
                if let (Some(ns), Some([a, b, c])) = (data.normals.as_mut(), normal_idx) {
                    ns.push(Vec3::new(scalars[a], scalars[b], scalars[c]));
                }
            } else if let Some(face) = list {
                data.faces.push(face);
            }
        }
    }
    for (fi, f) in data.faces.iter().enumerate() {
        if let Some(&bad) = f.iter().find(|&&i| i >= data.vertices.len()) {
            return Err(format!("face {fi} references vertex {bad} but only {} vertices exist", data.vertices.len()));
        }
    }
    Ok(data)
}

type Lines<'a> = std::iter::Peekable<std::slice::Split<'a, u8, fn(&u8) -> bool>>;

fn parse_header(bytes: &[u8]) -> Result<(Format, Vec<Element>, usize), String> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let start = pos;
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(format!("line {}, byte {}: header not terminated by end_header", line_no + 1, start));
        };
        pos += len + 1;
        line_no += 1;
        let line = std::str::from_utf8(&bytes[start..start + len])
            .map_err(|_| format!("line {line_no}, byte {start}: header is not valid text"))?
            .trim_end_matches('\r')
            .trim();
        let at = || format!("line {line_no}, byte {start}");
        let words: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(format!("{}: missing 'ply' magic", at()));
            }
            continue;
        }
        match words.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                format = Some(match words.get(1).copied() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    Some("binary_big_endian") => Format::BinaryBe,
                    other => return Err(format!("{}: unknown format {:?}", at(), other.unwrap_or(""))),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (words.get(1), words.get(2).and_then(|c| c.parse().ok())) else {
                    return Err(format!("{}: malformed element line", at()));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| format!("{}: property before any element", at()))?;
                let prop = if words.get(1) == Some(&"list") {
                    match (words.get(2).and_then(|s| Scalar::parse(s)), words.get(3).and_then(|s| Scalar::parse(s)), words.get(4)) {
                        (Some(count), Some(item), Some(name)) => Property::List {
                            name: name.to_string(),
                            count,
                            item,
                        },
                        _ => return Err(format!("{}: malformed list property", at())),
                    }
                } else {
                    match (words.get(1).and_then(|s| Scalar::parse(s)), words.get(2)) {
                        (Some(ty), Some(name)) => Property::Scalar {
                            name: name.to_string(),
                            ty,
                        },
                        _ => return Err(format!("{}: malformed property", at())),
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(format!("{}: unexpected header keyword '{other}'", at())),
        }
    }
    let format = format.ok_or_else(|| "header has no format line".to_string())?;
    Ok((format, elements, pos))
}

enum Body<'a> {
    Ascii(AsciiBody<'a>),
    Binary { bytes: &'a [u8], pos: usize, big_endian: bool },
}

struct AsciiBody<'a> {
    lines: Lines<'a>,
    offset: usize,
    line_no: usize,
    current: Vec<(usize, &'a str)>,
    cursor: usize,
    line_start: usize,
}

fn is_newline(b: &u8) -> bool {
    *b == b'\n'
}

impl<'a> AsciiBody<'a> {
    fn new(bytes: &'a [u8], start: usize) -> Self {
        let header_lines = bytes[..start].iter().filter(|&&b| b == b'\n').count();
        AsciiBody {
            lines: bytes[start..].split(is_newline as fn(&u8) -> bool).peekable(),
            offset: start,
            line_no: header_lines,
            current: Vec::new(),
            cursor: 0,
            line_start: start,
        }
    }
}

impl Body<'_> {
    fn location(&self) -> String {
        match self {
            Body::Ascii(a) => {
                let byte = a.current.get(a.cursor).map(|t| t.0).unwrap_or(a.line_start);
                format!("line {}, byte {}", a.line_no, byte)
            }
            Body::Binary { pos, .. } => format!("byte {pos}"),
        }
    }

    fn start_record(&mut self) -> Result<(), String> {
        let Body::Ascii(a) = self else { return Ok(()) };
        loop {
            let Some(raw) = a.lines.next() else {
                return Err(format!("line {}, byte {}: unexpected end of data", a.line_no + 1, a.offset));
            };
            let start = a.offset;
            a.offset += raw.len() + 1;
            a.line_no += 1;
            a.line_start = start;
            let text = std::str::from_utf8(raw).map_err(|_| format!("line {}, byte {start}: not valid text", a.line_no))?;
            let mut tokens = Vec::new();
            let mut idx = 0;
            for tok in text.split(|c: char| c.is_ascii_whitespace()) {
                if !tok.is_empty() {
                    tokens.push((start + idx, tok));
                }
                idx += tok.len() + 1;
            }
            if tokens.is_empty() {
                continue;
            }
            a.current = tokens;
            a.cursor = 0;
            return Ok(());
        }
    }

    fn end_record(&mut self) -> Result<(), String> {
        if let Body::Ascii(a) = self {
            if a.cursor != a.current.len() {
                return Err(format!(
                    "line {}, byte {}: {} extra values on record",
                    a.line_no,
                    a.current[a.cursor].0,
                    a.current.len() - a.cursor
                ));
            }
        }
        Ok(())
    }

    fn read(&mut self, ty: Scalar) -> Result<f64, String> {
        match self {
            Body::Ascii(a) => {
                let Some(&(byte, tok)) = a.current.get(a.cursor) else {
                    return Err(format!("line {}, byte {}: record has too few values", a.line_no, a.line_start));
                };
                a.cursor += 1;
                let v: f64 = tok
                    .parse()
                    .map_err(|_| format!("line {}, byte {byte}: cannot parse '{tok}' as a number", a.line_no))?;
                if matches!(ty, Scalar::F32 | Scalar::F64) || v.fract() == 0.0 {
                    Ok(v)
                } else {
                    Err(format!("line {}, byte {byte}: expected an integer, found '{tok}'", a.line_no))
                }
            }
            Body::Binary { bytes, pos, big_endian } => {
                let n = ty.size();
                if *pos + n > bytes.len() {
                    return Err(format!("byte {}: unexpected end of data ({} bytes available)", *pos, bytes.len() - *pos));
                }
                let mut buf = [0u8; 8];
                buf[..n].copy_from_slice(&bytes[*pos..*pos + n]);
                if *big_endian {
                    buf[..n].reverse();
                }
                *pos += n;
                Ok(match ty {
                    Scalar::I8 => buf[0] as i8 as f64,
                    Scalar::U8 => buf[0] as f64,
                    Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
                    Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
                    Scalar::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
                    Scalar::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
                    Scalar::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
                    Scalar::F64 => f64::from_le_bytes(buf),
                })
            }
        }
    }
}

/// ASCII PLY with positions and normals, one vertex per line.
pub fn write_ply_points(points: &[Vec3], normals: &[Vec3], comment: &str) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    for line in comment.lines() {
        let _ = writeln!(s, "comment {line}");
    }
    let _ = writeln!(s, "element vertex {}", points.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    s.push_str("property double nx\nproperty double ny\nproperty double nz\nend_header\n");
    for (p, n) in points.iter().zip(normals) {
        let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    s
}

/// Binary little-endian PLY of a triangle mesh.
pub fn write_ply_mesh_binary(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        vertices.len(),
        faces.len()
    )
    .into_bytes();
    for v in vertices {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for f in faces {
        out.push(3);
        for i in f {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    out
}
