//! Wavefront OBJ reader: `v` (optionally with trailing RGB), `vt`, `vn`, `f`
//! and `mtllib`/`usemtl` diffuse textures.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Vec2, Vec3};

use super::{Texture, TriMesh};

pub(super) fn load(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_owned(),
        line,
        msg,
    };

    let mut positions = Vec::new();
    let mut colors: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<Vec2> = Vec::new();
    let mut normal_count = 0usize;
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut face_uvs: Vec<Option<[usize; 3]>> = Vec::new();
    let mut materials: HashMap<String, String> = HashMap::new();
    let mut texture_file: Option<String> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let rest: Vec<&str> = it.collect();
        let floats = |xs: &[&str]| -> Result<Vec<f64>> {
            xs.iter()
                .map(|s| s.parse::<f64>().map_err(|_| perr(lineno, format!("bad number '{s}'"))))
                .collect()
        };
        match tag {
            "v" => {
                let v = floats(&rest)?;
                if v.len() != 3 && v.len() != 6 {
                    return Err(perr(lineno, format!("vertex needs 3 or 6 values, got {}", v.len())));
                }
                positions.push(Vec3::new(v[0], v[1], v[2]));
                if v.len() == 6 {
                    colors.push(Vec3::new(v[3], v[4], v[5]));
                }
            }
            "vt" => {
                let v = floats(&rest)?;
                if v.len() < 2 {
                    return Err(perr(lineno, "texture coordinate needs 2 values".into()));
                }
                texcoords.push(Vec2::new(v[0], v[1]));
            }
            "vn" => {
                floats(&rest)?;
                normal_count += 1;
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(perr(lineno, "face needs at least 3 vertices".into()));
                }
                let mut corners = Vec::with_capacity(rest.len());
                for tok in &rest {
                    let mut parts = tok.split('/');
                    let resolve = |s: &str, n: usize, what: &str| -> Result<usize> {
                        let i: i64 = s.parse().map_err(|_| perr(lineno, format!("bad {what} index '{s}'")))?;
                        let idx = if i > 0 { i - 1 } else { n as i64 + i };
                        if idx < 0 || idx as usize >= n {
                            return Err(perr(lineno, format!("{what} index {i} out of range")));
                        }
                        Ok(idx as usize)
                    };
                    let v = resolve(parts.next().unwrap_or(""), positions.len(), "vertex")?;
                    let vt = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve(s, texcoords.len(), "texcoord")?),
                        _ => None,
                    };
                    if let Some(s) = parts.next() {
                        if !s.is_empty() {
                            resolve(s, normal_count, "normal")?;
                        }
                    }
                    corners.push((v, vt));
                }
                // fan triangulation
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    faces.push([tri[0].0 as u32, tri[1].0 as u32, tri[2].0 as u32]);
                    face_uvs.push(match (tri[0].1, tri[1].1, tri[2].1) {
                        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                        _ => None,
                    });
                }
            }
            "mtllib" => {
                let name = rest.join(" ");
                let mtl_path = path.with_file_name(&name);
                parse_mtl(&mtl_path, &mut materials)?;
            }
            "usemtl" => {
                let name = rest.join(" ");
                if let Some(tex) = materials.get(&name) {
                    if texture_file.as_ref().is_some_and(|t| t != tex) {
                        return Err(perr(lineno, "only one diffuse texture per mesh is supported".into()));
                    }
                    texture_file = Some(tex.clone());
                }
            }
            _ => {}
        }
    }

    if !colors.is_empty() && colors.len() != positions.len() {
        return Err(perr(0, "either all or no vertices may carry colors".into()));
    }
    if faces.is_empty() {
        return Err(perr(0, "no faces".into()));
    }

    let texture = match &texture_file {
        Some(file) => Some(Texture::load(&path.with_file_name(file))?),
        None => None,
    };
    let uvs = if face_uvs.iter().any(Option::is_some) {
        Some(
            face_uvs
                .iter()
                .map(|c| match c {
                    Some([a, b, c]) => [texcoords[*a], texcoords[*b], texcoords[*c]],
                    None => [Vec2::zeros(); 3],
                })
                .collect(),
        )
    } else {
        None
    };
    let mesh = TriMesh::with_uvs_texture(positions, faces, uvs, texture)?;
    if colors.is_empty() {
        Ok(mesh)
    } else {
        mesh.with_colors(colors)
    }
}

fn parse_mtl(path: &Path, out: &mut HashMap<String, String>) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    let mut current: Option<String> = None;
    for line in text.lines() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix("newmtl ") {
            current = Some(name.trim().to_owned());
        } else if let Some(file) = line.strip_prefix("map_Kd ") {
            if let Some(name) = &current {
                // options such as `-s` are not supported; the file is the last token
                let file = file.split_whitespace().last().unwrap_or("");
                out.insert(name.clone(), file.to_owned());
            }
        }
    }
    Ok(())
}
