//! Indexed triangle meshes with face adjacency, normals and optional color
//! or texture signals.

mod obj;
pub mod ply;
pub mod shapes;
mod texture;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frame::TangentFrame;
use crate::math::{rotate_about, Vec2, Vec3};

pub use texture::Texture;

/// Faces with area below this are rejected.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Loads a mesh, inferring the format from the file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path).ok_or_else(|| Error::Parse {
        path: path.to_owned(),
        line: 0,
        msg: "unknown mesh extension (expected .obj or .ply)".into(),
    })?;
    load_mesh_as(path, format)
}

pub fn load_mesh_as(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh> {
    match format {
        MeshFormat::Obj => obj::load(path.as_ref()),
        MeshFormat::Ply => ply::load_mesh(path.as_ref()),
    }
}

/// An immutable triangle mesh. Edge `k` of face `f` runs from corner `k` to
/// corner `(k + 1) % 3`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    vertex_normals: Vec<Vec3>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
    adjacency: Vec<[Option<u32>; 3]>,
    edge_count: usize,
    boundary_edges: usize,
    colors: Option<Vec<Vec3>>,
    uvs: Option<Vec<[Vec2; 3]>>,
    texture: Option<Arc<Texture>>,
}

impl TriMesh {
    /// Validates the faces, orients closed components outward and builds
    /// adjacency and normals.
    pub fn new(positions: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        Self::build(positions, faces, None)
    }

    fn build(positions: Vec<Vec3>, mut faces: Vec<[u32; 3]>, mut uvs: Option<Vec<[Vec2; 3]>>) -> Result<Self> {
        let nv = positions.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v as usize >= nv {
                    return Err(Error::BadIndex {
                        face: fi,
                        vertex: v as usize,
                        count: nv,
                    });
                }
            }
            let area = triangle_area(&positions, f);
            if !(area > MIN_FACE_AREA) {
                return Err(Error::DegenerateFace { face: fi, area });
            }
        }

        // undirected edge -> incident (face, corner) pairs
        let mut edges: HashMap<(u32, u32), Vec<(u32, u8)>> = HashMap::new();
        let mut edge_order: Vec<(u32, u32)> = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edges.entry(key).or_default();
                if entry.is_empty() {
                    edge_order.push(key);
                }
                entry.push((fi as u32, k as u8));
            }
        }
        for (eid, key) in edge_order.iter().enumerate() {
            let inc = &edges[key];
            if inc.len() > 2 {
                return Err(Error::NonManifoldEdge {
                    edge: eid,
                    a: key.0 as usize,
                    b: key.1 as usize,
                    count: inc.len(),
                });
            }
        }

        let mut adjacency = vec![[None; 3]; faces.len()];
        let mut boundary_edges = 0;
        for key in &edge_order {
            let inc = &edges[key];
            if inc.len() == 1 {
                boundary_edges += 1;
                continue;
            }
            let (fa, ka) = inc[0];
            let (fb, kb) = inc[1];
            let da = faces[fa as usize][ka as usize];
            let db = faces[fb as usize][kb as usize];
            if da == db {
                return Err(Error::InconsistentWinding {
                    a: key.0 as usize,
                    b: key.1 as usize,
                });
            }
            adjacency[fa as usize][ka as usize] = Some(fb);
            adjacency[fb as usize][kb as usize] = Some(fa);
        }

        // flip closed components whose signed volume is negative
        let components = face_components(&adjacency);
        let ncomp = components.iter().copied().max().map_or(0, |c| c + 1);
        let mut closed = vec![true; ncomp];
        let mut volume = vec![0.0; ncomp];
        for (fi, f) in faces.iter().enumerate() {
            let c = components[fi];
            if adjacency[fi].iter().any(Option::is_none) {
                closed[c] = false;
            }
            let (a, b, cc) = (
                positions[f[0] as usize],
                positions[f[1] as usize],
                positions[f[2] as usize],
            );
            volume[c] += a.dot(&b.cross(&cc)) / 6.0;
        }
        let flip: Vec<bool> = (0..ncomp).map(|c| closed[c] && volume[c] < 0.0).collect();
        if flip.iter().any(|&x| x) {
            for (fi, f) in faces.iter_mut().enumerate() {
                if flip[components[fi]] {
                    f.swap(1, 2);
                    if let Some(uv) = uvs.as_mut() {
                        uv[fi].swap(1, 2);
                    }
                    // edge 0 (0->1) becomes 0->2 (old edge 2), edge 2 becomes old edge 0
                    adjacency[fi].swap(0, 2);
                }
            }
        }

        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        let mut vertex_normals = vec![Vec3::zeros(); nv];
        for f in &faces {
            let (a, b, c) = (
                positions[f[0] as usize],
                positions[f[1] as usize],
                positions[f[2] as usize],
            );
            let cr = (b - a).cross(&(c - a));
            let len = cr.norm();
            face_normals.push(cr / len);
            face_areas.push(0.5 * len);
            for &v in f {
                vertex_normals[v as usize] += cr;
            }
        }
        for n in &mut vertex_normals {
            let len = n.norm();
            *n = if len > 0.0 { *n / len } else { Vec3::z() };
        }

        Ok(TriMesh {
            positions,
            faces,
            vertex_normals,
            face_normals,
            face_areas,
            adjacency,
            edge_count: edge_order.len(),
            boundary_edges,
            colors: None,
            uvs,
            texture: None,
        })
    }

    /// Attaches per-vertex RGB colors in `[0, 1]`.
    pub fn with_colors(mut self, colors: Vec<Vec3>) -> Result<Self> {
        if colors.len() != self.positions.len() {
            return Err(Error::Dimension(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.positions.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    /// Attaches per-corner uv coordinates and the texture they index.
    pub fn with_texture(mut self, uvs: Vec<[Vec2; 3]>, texture: Texture) -> Result<Self> {
        if uvs.len() != self.faces.len() {
            return Err(Error::Dimension(format!(
                "{} uv triples for {} faces",
                uvs.len(),
                self.faces.len()
            )));
        }
        self.uvs = Some(uvs);
        self.texture = Some(Arc::new(texture));
        Ok(self)
    }

    pub(crate) fn with_uvs_texture(
        positions: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        uvs: Option<Vec<[Vec2; 3]>>,
        texture: Option<Texture>,
    ) -> Result<Self> {
        let mut mesh = Self::build(positions, faces, uvs)?;
        mesh.texture = texture.map(Arc::new);
        if mesh.texture.is_none() {
            mesh.uvs = None;
        }
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.boundary_edges
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges == 0
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn position(&self, v: usize) -> Vec3 {
        self.positions[v]
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        let t = self.faces[f];
        [t[0] as usize, t[1] as usize, t[2] as usize]
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        let t = self.face(f);
        [self.positions[t[0]], self.positions[t[1]], self.positions[t[2]]]
    }

    pub fn vertex_normal(&self, v: usize) -> Vec3 {
        self.vertex_normals[v]
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_normals[f]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_areas[f]
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Centroid `c_f` of face `f`.
    pub fn face_center(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        (a + b + c) / 3.0
    }

    /// Largest distance from the face centroid to one of its corners.
    pub fn face_circumradius(&self, f: usize) -> f64 {
        let c = self.face_center(f);
        self.face_vertices(f).iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }

    /// Neighbor across each edge; `None` on the boundary.
    pub fn face_neighbors(&self, f: usize) -> [Option<usize>; 3] {
        let a = self.adjacency[f];
        [
            a[0].map(|x| x as usize),
            a[1].map(|x| x as usize),
            a[2].map(|x| x as usize),
        ]
    }

    /// Index `k` of the edge of `f` shared with `g`.
    pub fn shared_edge_index(&self, f: usize, g: usize) -> Option<usize> {
        self.adjacency[f].iter().position(|&n| n == Some(g as u32))
    }

    /// Endpoints of the edge of `f` shared with `g`, in `f`'s winding order.
    pub fn shared_edge(&self, f: usize, g: usize) -> Option<(usize, usize)> {
        let k = self.shared_edge_index(f, g)?;
        let t = self.face(f);
        Some((t[k], t[(k + 1) % 3]))
    }

    pub fn colors(&self) -> Option<&[Vec3]> {
        self.colors.as_deref()
    }

    pub fn uvs(&self) -> Option<&[[Vec2; 3]]> {
        self.uvs.as_deref()
    }

    pub fn texture(&self) -> Option<&Texture> {
        self.texture.as_deref()
    }

    /// Uniformly scales all positions (areas scale quadratically).
    pub fn scaled(&self, factor: f64) -> Result<TriMesh> {
        let positions = self.positions.iter().map(|p| p * factor).collect();
        let mut m = Self::build(positions, self.faces.clone(), self.uvs.clone())?;
        m.colors = self.colors.clone();
        m.texture = self.texture.clone();
        Ok(m)
    }

    /// Vertex-to-vertex adjacency built from the unique undirected edges,
    /// each list sorted ascending.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices()];
        for f in 0..self.num_faces() {
            let t = self.face(f);
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.num_vertices()];
        for f in 0..self.num_faces() {
            for v in self.face(f) {
                vf[v].push(f);
            }
        }
        vf
    }

    /// Point on face `f` at barycentric coordinates `bary`.
    pub fn point_at(&self, f: usize, bary: [f64; 3]) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        a * bary[0] + b * bary[1] + c * bary[2]
    }

    /// Barycentric coordinates of `p` (assumed in the plane of `f`).
    pub fn barycentric(&self, f: usize, p: &Vec3) -> [f64; 3] {
        let [a, b, c] = self.face_vertices(f);
        let n = self.face_normals[f];
        let area2 = (b - a).cross(&(c - a)).dot(&n);
        let wa = (c - b).cross(&(p - b)).dot(&n) / area2;
        let wb = (a - c).cross(&(p - c)).dot(&n) / area2;
        [wa, wb, 1.0 - wa - wb]
    }
}

fn triangle_area(positions: &[Vec3], f: &[u32; 3]) -> f64 {
    let a = positions[f[0] as usize];
    let b = positions[f[1] as usize];
    let c = positions[f[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn face_components(adjacency: &[[Option<u32>; 3]]) -> Vec<usize> {
    let mut comp = vec![usize::MAX; adjacency.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..adjacency.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(f) = stack.pop() {
            for g in adjacency[f].iter().flatten() {
                let g = *g as usize;
                if comp[g] == usize::MAX {
                    comp[g] = next;
                    stack.push(g);
                }
            }
        }
        next += 1;
    }
    comp
}

/// `V − E + F` with `E` counted over unique undirected edges.
pub fn euler_characteristic(mesh: &TriMesh) -> i64 {
    mesh.num_vertices() as i64 - mesh.num_edges() as i64 + mesh.num_faces() as i64
}

/// Rotates `frame` (lying in `face_u`'s plane) about the edge shared with
/// `face_v` so that it lies in `face_v`'s plane.
pub fn unfold_frame_across_edge(
    frame: &TangentFrame,
    face_u: usize,
    face_v: usize,
    mesh: &TriMesh,
) -> Result<TangentFrame> {
    let (a, b) = mesh
        .shared_edge(face_u, face_v)
        .ok_or(Error::NotAdjacent(face_u, face_v))?;
    let axis = (mesh.position(b) - mesh.position(a)).normalize();
    Ok(unfold_about_edge(
        frame,
        &axis,
        &mesh.face_normal(face_u),
        &mesh.face_normal(face_v),
    ))
}

/// Rotation about unit `axis` taking `nu` to `nv`, applied to the frame.
pub(crate) fn unfold_about_edge(frame: &TangentFrame, axis: &Vec3, nu: &Vec3, nv: &Vec3) -> TangentFrame {
    let angle = axis.dot(&nu.cross(nv)).atan2(nu.dot(nv));
    let i = rotate_about(&frame.i, axis, angle);
    let i = (i - nv * nv.dot(&i)).normalize();
    TangentFrame {
        i,
        j: nv.cross(&i),
        n: *nv,
    }
}

/// Rotates a vector lying in `face_u`'s plane across the shared edge into
/// `face_v`'s plane.
pub(crate) fn unfold_vector(mesh: &TriMesh, face_u: usize, face_v: usize, v: &Vec3) -> Option<Vec3> {
    let (a, b) = mesh.shared_edge(face_u, face_v)?;
    let axis = (mesh.position(b) - mesh.position(a)).normalize();
    let nu = mesh.face_normal(face_u);
    let nv = mesh.face_normal(face_v);
    let angle = axis.dot(&nu.cross(&nv)).atan2(nu.dot(&nv));
    Some(rotate_about(v, &axis, angle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles(z: f64) -> TriMesh {
        TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, z),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_has_no_neighbors() {
        let m = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.num_faces(), 1);
        assert_eq!(m.face_neighbors(0), [None, None, None]);
        assert_eq!(euler_characteristic(&m), 1);
    }

    #[test]
    fn adjacency_is_symmetric_with_shared_endpoints() {
        let m = two_triangles(0.3);
        assert_eq!(m.shared_edge(0, 1), Some((1, 2)));
        assert_eq!(m.shared_edge(1, 0), Some((2, 1)));
        for f in 0..m.num_faces() {
            for g in m.face_neighbors(f).into_iter().flatten() {
                assert!(m.face_neighbors(g).contains(&Some(f)));
            }
        }
    }

    #[test]
    fn rejects_degenerate_and_nonmanifold() {
        let e = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(e, Error::DegenerateFace { face: 0, .. }));

        let e = TriMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z()],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap_err();
        assert!(matches!(e, Error::NonManifoldEdge { count: 3, .. }));
    }

    #[test]
    fn rejects_inconsistent_winding() {
        let e = TriMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap_err();
        assert!(matches!(e, Error::InconsistentWinding { .. }));
    }

    #[test]
    fn inward_closed_mesh_is_flipped() {
        let cube = shapes::unit_cube();
        let inverted: Vec<[u32; 3]> = cube.faces().iter().map(|f| [f[0], f[2], f[1]]).collect();
        let m = TriMesh::new(cube.positions().to_vec(), inverted).unwrap();
        for v in 0..m.num_vertices() {
            let outward = m.position(v) - Vec3::new(0.5, 0.5, 0.5);
            assert!(m.vertex_normal(v).dot(&outward) > 0.0);
        }
        for f in 0..m.num_faces() {
            for g in m.face_neighbors(f).into_iter().flatten() {
                let (a, b) = m.shared_edge(f, g).unwrap();
                assert_eq!(m.shared_edge(g, f), Some((b, a)));
            }
        }
    }

    #[test]
    fn unfold_coplanar_is_identity() {
        let m = two_triangles(0.0);
        let fr = TangentFrame::from_normal_direction(m.face_normal(0), Vec3::new(0.3, 0.8, 0.0));
        let out = unfold_frame_across_edge(&fr, 0, 1, &m).unwrap();
        assert!((out.i - fr.i).norm() < 1e-9 && (out.j - fr.j).norm() < 1e-9);
    }

    #[test]
    fn unfold_cube_edge_keeps_edge_direction() {
        let cube = shapes::unit_cube();
        // find two faces meeting at a 90 degree edge
        let (f, g) = (0..cube.num_faces())
            .flat_map(|f| cube.face_neighbors(f).into_iter().flatten().map(move |g| (f, g)))
            .find(|&(f, g)| cube.face_normal(f).dot(&cube.face_normal(g)).abs() < 1e-9)
            .unwrap();
        let (a, b) = cube.shared_edge(f, g).unwrap();
        let e = (cube.position(b) - cube.position(a)).normalize();
        let fr = TangentFrame::from_normal_direction(cube.face_normal(f), e);
        let out = unfold_frame_across_edge(&fr, f, g, &cube).unwrap();
        assert!((out.i - e).norm() < 1e-12);
        assert!((out.n - cube.face_normal(g)).norm() < 1e-12);
        assert!(out.j.dot(&fr.j).abs() < 1e-12);
        assert!(unfold_frame_across_edge(&fr, f, f, &cube).is_err());
    }
}
