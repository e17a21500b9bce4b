//! PLY reading (ascii and binary little-endian) and ascii writing.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::math::Vec3;

use super::TriMesh;

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
    fn parse(s: &str) -> Option<Self> {
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

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => LittleEndian::read_i16(b) as f64,
            Scalar::U16 => LittleEndian::read_u16(b) as f64,
            Scalar::I32 => LittleEndian::read_i32(b) as f64,
            Scalar::U32 => LittleEndian::read_u32(b) as f64,
            Scalar::F32 => LittleEndian::read_f32(b) as f64,
            Scalar::F64 => LittleEndian::read_f64(b),
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

/// Raw contents of a PLY file: every scalar vertex property by name, the
/// declared vertex property types, and the face index lists.
#[derive(Debug, Clone, Default)]
pub struct PlyData {
    pub vertex_props: HashMap<String, Vec<f64>>,
    pub vertex_types: HashMap<String, &'static str>,
    pub faces: Vec<Vec<u32>>,
}

impl PlyData {
    pub fn vertex_count(&self) -> usize {
        self.vertex_props.get("x").map_or(0, Vec::len)
    }

    pub fn prop(&self, name: &str) -> Option<&[f64]> {
        self.vertex_props.get(name).map(Vec::as_slice)
    }
}

pub fn read(path: &Path) -> Result<PlyData> {
    let bytes = fs::read(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_owned(),
        line,
        msg,
    };

    // header
    let mut pos = 0;
    let mut line_no = 0;
    let mut binary = false;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| perr(line_no + 1, "unterminated header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| perr(line_no + 1, "header is not utf-8".into()))?
            .trim();
        pos += end + 1;
        line_no += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            _ if line_no == 1 => {
                if line != "ply" {
                    return Err(perr(1, "missing 'ply' magic".into()));
                }
            }
            Some("format") => match toks.get(1).copied() {
                Some("ascii") => binary = false,
                Some("binary_little_endian") => binary = true,
                Some(other) => return Err(perr(line_no, format!("unsupported format '{other}'"))),
                None => return Err(perr(line_no, "format missing".into())),
            },
            Some("element") => {
                let (Some(name), Some(count)) = (toks.get(1), toks.get(2)) else {
                    return Err(perr(line_no, "malformed element".into()));
                };
                let count = count
                    .parse()
                    .map_err(|_| perr(line_no, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "property before element".into()))?;
                let ty = |s: &str| Scalar::parse(s).ok_or_else(|| perr(line_no, format!("unknown type '{s}'")));
                if toks.get(1) == Some(&"list") {
                    if toks.len() != 5 {
                        return Err(perr(line_no, "malformed list property".into()));
                    }
                    el.props.push(Property::List {
                        name: toks[4].to_string(),
                        count: ty(toks[2])?,
                        item: ty(toks[3])?,
                    });
                } else {
                    if toks.len() != 3 {
                        return Err(perr(line_no, "malformed property".into()));
                    }
                    el.props.push(Property::Scalar {
                        name: toks[2].to_string(),
                        ty: ty(toks[1])?,
                    });
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(perr(line_no, format!("unexpected header keyword '{other}'"))),
        }
    }

    let mut data = PlyData::default();
    let mut ascii_lines = if binary {
        None
    } else {
        Some(
            std::str::from_utf8(&bytes[pos..])
                .map_err(|_| perr(line_no + 1, "body is not utf-8".into()))?
                .lines()
                .enumerate()
                .map(move |(i, l)| (i + line_no + 1, l))
                .filter(|(_, l)| !l.trim().is_empty()),
        )
    };

    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        if is_vertex {
            for p in &el.props {
                if let Property::Scalar { name, ty } = p {
                    data.vertex_props.insert(name.clone(), Vec::with_capacity(el.count));
                    data.vertex_types.insert(
                        name.clone(),
                        match ty {
                            Scalar::U8 => "uchar",
                            Scalar::F64 => "double",
                            _ => "float",
                        },
                    );
                }
            }
        }
        for _ in 0..el.count {
            if let Some(lines) = ascii_lines.as_mut() {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| perr(0, format!("truncated '{}' element", el.name)))?;
                let mut toks = line.split_whitespace();
                let mut next = || -> Result<f64> {
                    let t = toks.next().ok_or_else(|| perr(ln, "too few values".into()))?;
                    t.parse().map_err(|_| perr(ln, format!("bad number '{t}'")))
                };
                for p in &el.props {
                    match p {
                        Property::Scalar { name, .. } => {
                            let v = next()?;
                            if is_vertex {
                                data.vertex_props.get_mut(name).unwrap().push(v);
                            }
                        }
                        Property::List { name, .. } => {
                            let n = next()? as usize;
                            let mut items = Vec::with_capacity(n);
                            for _ in 0..n {
                                items.push(next()? as u32);
                            }
                            if is_face && (name == "vertex_indices" || name == "vertex_index") {
                                data.faces.push(items);
                            }
                        }
                    }
                }
            } else {
                let mut take = |n: usize| -> Result<&[u8]> {
                    if pos + n > bytes.len() {
                        return Err(perr(0, format!("truncated binary '{}' element", el.name)));
                    }
                    let s = &bytes[pos..pos + n];
                    pos += n;
                    Ok(s)
                };
                for p in &el.props {
                    match p {
                        Property::Scalar { name, ty } => {
                            let v = ty.read(take(ty.size())?);
                            if is_vertex {
                                data.vertex_props.get_mut(name).unwrap().push(v);
                            }
                        }
                        Property::List { name, count, item } => {
                            let n = count.read(take(count.size())?) as usize;
                            let mut items = Vec::with_capacity(n);
                            for _ in 0..n {
                                items.push(item.read(take(item.size())?) as u32);
                            }
                            if is_face && (name == "vertex_indices" || name == "vertex_index") {
                                data.faces.push(items);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(data)
}

pub(super) fn load_mesh(path: &Path) -> Result<TriMesh> {
    let data = read(path)?;
    let perr = |msg: &str| Error::Parse {
        path: path.to_owned(),
        line: 0,
        msg: msg.into(),
    };
    let (Some(x), Some(y), Some(z)) = (data.prop("x"), data.prop("y"), data.prop("z")) else {
        return Err(perr("vertex element needs x, y, z"));
    };
    let positions: Vec<Vec3> = (0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
    let mut faces = Vec::new();
    for f in &data.faces {
        if f.len() < 3 {
            return Err(perr("face with fewer than 3 vertices"));
        }
        for k in 1..f.len() - 1 {
            faces.push([f[0], f[k], f[k + 1]]);
        }
    }
    let mesh = TriMesh::new(positions, faces)?;
    match (data.prop("red"), data.prop("green"), data.prop("blue")) {
        (Some(r), Some(g), Some(b)) => {
            let scale = if data.vertex_types.get("red") == Some(&"uchar") {
                1.0 / 255.0
            } else {
                1.0
            };
            let colors = (0..r.len()).map(|i| Vec3::new(r[i], g[i], b[i]) * scale).collect();
            mesh.with_colors(colors)
        }
        _ => Ok(mesh),
    }
}

/// A named per-vertex property for [`write_ascii`].
pub enum VertexProp<'a> {
    Float(&'a str, Vec<f64>),
    Uchar(&'a str, Vec<u8>),
}

/// Writes an ascii PLY with positions, extra vertex properties, faces and
/// optional per-face RGB colors.
pub fn write_ascii(
    out: &mut impl Write,
    positions: &[Vec3],
    extra: &[VertexProp<'_>],
    faces: &[[u32; 3]],
    face_colors: Option<&[[u8; 3]]>,
) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", positions.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property float {axis}")?;
    }
    for p in extra {
        match p {
            VertexProp::Float(n, _) => writeln!(out, "property float {n}")?,
            VertexProp::Uchar(n, _) => writeln!(out, "property uchar {n}")?,
        }
    }
    writeln!(out, "element face {}", faces.len())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    if face_colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(out, "property uchar {c}")?;
        }
    }
    writeln!(out, "end_header")?;
    for (vi, p) in positions.iter().enumerate() {
        write!(out, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?;
        for e in extra {
            match e {
                VertexProp::Float(_, v) => write!(out, " {}", v[vi] as f32)?,
                VertexProp::Uchar(_, v) => write!(out, " {}", v[vi])?,
            }
        }
        writeln!(out)?;
    }
    for (fi, f) in faces.iter().enumerate() {
        write!(out, "3 {} {} {}", f[0], f[1], f[2])?;
        if let Some(c) = face_colors {
            write!(out, " {} {} {}", c[fi][0], c[fi][1], c[fi][2])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
