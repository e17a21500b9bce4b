//! Field, singularity and label exports for inspection in mesh viewers.

use std::io::Write;

use crate::error::{Error, Result};
use crate::math::{any_tangent, signed_angle};
use crate::mesh::ply::{write_ascii, VertexProp};
use crate::mesh::TriMesh;
use crate::rosy::RoSyField;

/// Singular faces are painted this color.
pub const SINGULAR_RED: [u8; 3] = [255, 0, 0];

/// Fixed label palette; label `k` uses entry `k mod 20`.
pub const PALETTE: [[u8; 3]; 20] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [174, 199, 232],
    [255, 187, 120],
    [152, 223, 138],
    [255, 152, 150],
    [197, 176, 213],
    [196, 156, 148],
    [247, 182, 210],
    [199, 199, 199],
    [219, 219, 141],
    [158, 218, 229],
];

pub fn palette_color(label: u32) -> [u8; 3] {
    PALETTE[label as usize % PALETTE.len()]
}

/// Writes vertex positions with the six frame components `ix iy iz jx jy jz`.
pub fn write_field_ply(out: &mut impl Write, mesh: &TriMesh, field: &RoSyField) -> Result<()> {
    if field.frames().len() != mesh.num_vertices() {
        return Err(Error::Dimension("field and mesh vertex counts differ".into()));
    }
    let comp = |name, f: fn(&crate::frame::TangentFrame) -> f64| {
        VertexProp::Float(name, field.frames().iter().map(f).collect())
    };
    let extra = [
        comp("ix", |t| t.i.x),
        comp("iy", |t| t.i.y),
        comp("iz", |t| t.i.z),
        comp("jx", |t| t.j.x),
        comp("jy", |t| t.j.y),
        comp("jz", |t| t.j.z),
    ];
    write_ascii(out, mesh.positions(), &extra, mesh.faces(), None)?;
    Ok(())
}

/// Writes `face_index,quarter_index` rows with a header line.
pub fn write_singularities_csv(out: &mut impl Write, field: &RoSyField) -> Result<()> {
    writeln!(out, "face_index,quarter_index")?;
    for &(f, q) in field.singularities() {
        writeln!(out, "{f},{q}")?;
    }
    Ok(())
}

fn hue_rgb(h: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h6 % 2.0 - 1.0).abs();
    let (r, g, b) = match h6 as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |c: f64| (c * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Color of a frame: hue from the angle of `i` against a fixed tangent
/// reference, taken modulo a quarter turn so all four cross arms agree.
pub fn frame_color(frame: &crate::frame::TangentFrame) -> [u8; 3] {
    let reference = any_tangent(&frame.n);
    let a = signed_angle(&reference, &frame.i, &frame.n);
    hue_rgb(a.rem_euclid(std::f64::consts::FRAC_PI_2) / std::f64::consts::FRAC_PI_2)
}

fn write_colored(out: &mut impl Write, mesh: &TriMesh, colors: &[[u8; 3]], face_colors: &[[u8; 3]]) -> Result<()> {
    let channel = |name, k: usize| VertexProp::Uchar(name, colors.iter().map(|c| c[k]).collect());
    let extra = [channel("red", 0), channel("green", 1), channel("blue", 2)];
    write_ascii(out, mesh.positions(), &extra, mesh.faces(), Some(face_colors))?;
    Ok(())
}

fn mean_color(colors: &[[u8; 3]], f: [usize; 3]) -> [u8; 3] {
    let mut c = [0u8; 3];
    for (k, slot) in c.iter_mut().enumerate() {
        let s: u32 = f.iter().map(|&v| colors[v][k] as u32).sum();
        *slot = ((s + 1) / 3) as u8;
    }
    c
}

/// Per-vertex colors from frame angles; singular faces are red, other faces
/// carry the mean of their corner colors.
pub fn field_vertex_colors(mesh: &TriMesh, field: &RoSyField) -> (Vec<[u8; 3]>, Vec<[u8; 3]>) {
    let colors: Vec<[u8; 3]> = field.frames().iter().map(frame_color).collect();
    let mut faces: Vec<[u8; 3]> = (0..mesh.num_faces())
        .map(|f| mean_color(&colors, mesh.face(f)))
        .collect();
    for &(f, _) in field.singularities() {
        faces[f] = SINGULAR_RED;
    }
    (colors, faces)
}

pub fn write_field_viz(out: &mut impl Write, mesh: &TriMesh, field: &RoSyField) -> Result<()> {
    if field.frames().len() != mesh.num_vertices() {
        return Err(Error::Dimension("field and mesh vertex counts differ".into()));
    }
    let (v, f) = field_vertex_colors(mesh, field);
    write_colored(out, mesh, &v, &f)
}

/// Per-vertex palette colors; each face takes the label of its first corner.
pub fn write_label_viz(out: &mut impl Write, mesh: &TriMesh, labels: &[u32]) -> Result<()> {
    if labels.len() != mesh.num_vertices() {
        return Err(Error::Dimension(format!(
            "{} labels for {} vertices",
            labels.len(),
            mesh.num_vertices()
        )));
    }
    let colors: Vec<[u8; 3]> = labels.iter().map(|&l| palette_color(l)).collect();
    let faces: Vec<[u8; 3]> = mesh.faces().iter().map(|f| colors[f[0] as usize]).collect();
    write_colored(out, mesh, &colors, &faces)
}

/// Reads one label per line (blank lines and `#` comments skipped).
pub fn parse_labels(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        out.push(s.parse().map_err(|_| Error::Parse {
            path: "<labels>".into(),
            line: i + 1,
            msg: format!("'{s}' is not a label"),
        })?);
    }
    Ok(out)
}
