//! Geodesic neighborhoods with unfolded texture coordinates.
//!
//! Faces are expanded from the center face in order of the distance of their
//! unfolded centroid from the center point. Every face is unfolded exactly
//! once, along the first (shortest) route that reaches it, which fixes the
//! location of the seam around cone singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TangentFrame;
use crate::math::{Vec2, Vec3};
use crate::mesh::{unfold_about_edge, unfold_vector, TriMesh, MIN_FACE_AREA};
use crate::rosy::SurfaceSample;

/// A face reached by the traversal: texture coordinate of its centroid and
/// its unfolded tangent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceRecord {
    pub face: usize,
    pub t: Vec2,
    pub frame: TangentFrame,
}

impl FaceRecord {
    /// Texture coordinate of a point `q` lying on this face.
    pub fn coordinate(&self, mesh: &TriMesh, q: &Vec3) -> Vec2 {
        let l = self.frame.local(&(q - mesh.face_center(self.face)));
        self.t + Vec2::new(l[0], l[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMember {
    pub sample: usize,
    pub t: Vec2,
}

/// The geodesic neighborhood `Ω_ρ(p)` of a center sample.
#[derive(Debug, Clone)]
pub struct GeodesicPatch {
    pub center: SurfaceSample,
    pub rho: f64,
    pub members: Vec<PatchMember>,
    pub faces: Vec<FaceRecord>,
}

/// Samples grouped by the face that owns them. A sample on a shared edge
/// (or vertex) belongs to the lowest-indexed face containing it.
#[derive(Debug, Clone)]
pub struct SampleIndex {
    by_face: Vec<Vec<usize>>,
}

impl SampleIndex {
    pub fn new(mesh: &TriMesh, samples: &[SurfaceSample]) -> Self {
        let mut by_face = vec![Vec::new(); mesh.num_faces()];
        let vf = mesh.vertex_faces();
        for (si, s) in samples.iter().enumerate() {
            by_face[owning_face(mesh, &vf, s)].push(si);
        }
        SampleIndex { by_face }
    }

    pub fn samples_on(&self, face: usize) -> &[usize] {
        &self.by_face[face]
    }
}

fn owning_face(mesh: &TriMesh, vf: &[Vec<usize>], s: &SurfaceSample) -> usize {
    const EPS: f64 = 1e-12;
    let corners = mesh.face(s.face);
    let zeros: Vec<usize> = (0..3).filter(|&c| s.bary[c].abs() <= EPS).collect();
    match zeros.len() {
        1 => {
            // edge opposite corner c is edge (c + 1) % 3
            let k = (zeros[0] + 1) % 3;
            match mesh.face_neighbors(s.face)[k] {
                Some(g) if g < s.face => g,
                _ => s.face,
            }
        }
        2 => {
            let c = (0..3).find(|c| !zeros.contains(c)).unwrap();
            vf[corners[c]].iter().copied().min().unwrap_or(s.face)
        }
        _ => s.face,
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    face: usize,
    slot: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on (key, face, slot)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.face.cmp(&self.face))
            .then(other.slot.cmp(&self.slot))
    }
}

/// Unfolds the faces around `center` whose centroids can lie within `reach`
/// of it. Faces come back in pop order; the pop keys are nondecreasing.
pub fn unfold_faces(mesh: &TriMesh, center: &SurfaceSample, reach: f64) -> Result<Vec<FaceRecord>> {
    let f0 = center.face;
    if mesh.face_area(f0) <= MIN_FACE_AREA {
        return Err(Error::DegenerateFace {
            face: f0,
            area: mesh.face_area(f0),
        });
    }
    let frame0 = TangentFrame::from_normal_direction(mesh.face_normal(f0), center.frame.i);
    let l = frame0.local(&(mesh.face_center(f0) - center.position));
    let t0 = Vec2::new(l[0], l[1]);

    let mut visited = vec![false; mesh.num_faces()];
    let mut pending: Vec<(Vec2, TangentFrame)> = vec![(t0, frame0)];
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        key: t0.norm(),
        face: f0,
        slot: 0,
    });
    let mut records = Vec::new();
    let mut last_key = f64::NEG_INFINITY;
    while let Some(e) = heap.pop() {
        if visited[e.face] {
            continue;
        }
        debug_assert!(e.key >= last_key);
        last_key = e.key;
        visited[e.face] = true;
        let (t, frame) = pending[e.slot];
        records.push(FaceRecord { face: e.face, t, frame });
        let cu = mesh.face_center(e.face);
        for g in mesh.face_neighbors(e.face).into_iter().flatten() {
            if visited[g] {
                continue;
            }
            let (a, b) = mesh.shared_edge(e.face, g).expect("neighbors share an edge");
            let axis = (mesh.position(b) - mesh.position(a)).normalize();
            let fg = unfold_about_edge(&frame, &axis, &mesh.face_normal(e.face), &mesh.face_normal(g));
            // hinge at vertex a: exact for the unfolded pair of triangles
            let pa = mesh.position(a);
            let la = frame.local(&(pa - cu));
            let lg = fg.local(&(mesh.face_center(g) - pa));
            let tg = t + Vec2::new(la[0] + lg[0], la[1] + lg[1]);
            if tg.norm() > reach + mesh.face_circumradius(g) {
                continue;
            }
            pending.push((tg, fg));
            heap.push(Entry {
                key: tg.norm().max(e.key),
                face: g,
                slot: pending.len() - 1,
            });
        }
    }
    Ok(records)
}

/// Extracts `Ω_ρ(center)`: every indexed sample whose unfolded coordinate
/// satisfies `‖t‖_∞ < ρ`.
pub fn extract_geodesic_patch(
    mesh: &TriMesh,
    samples: &[SurfaceSample],
    index: &SampleIndex,
    center: &SurfaceSample,
    rho: f64,
) -> Result<GeodesicPatch> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "patch radius must be positive, got {rho}"
        )));
    }
    let faces = unfold_faces(mesh, center, SQRT_2 * rho)?;
    let mut members = Vec::new();
    for rec in &faces {
        for &s in index.samples_on(rec.face) {
            let t = rec.coordinate(mesh, &samples[s].position);
            if t.x.abs() < rho && t.y.abs() < rho {
                members.push(PatchMember { sample: s, t });
            }
        }
    }
    Ok(GeodesicPatch {
        center: *center,
        rho,
        members,
        faces,
    })
}

/// Debug record of a patch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PatchDump {
    pub center_face: usize,
    pub rho: f64,
    pub members: Vec<MemberDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MemberDump {
    pub sample_id: usize,
    pub tx: f64,
    pub ty: f64,
}

impl GeodesicPatch {
    pub fn dump(&self) -> PatchDump {
        PatchDump {
            center_face: self.center.face,
            rho: self.rho,
            members: self
                .members
                .iter()
                .map(|m| MemberDump {
                    sample_id: m.sample,
                    tx: m.t.x,
                    ty: m.t.y,
                })
                .collect(),
        }
    }
}

/// End point of a straight walk on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceHit {
    pub face: usize,
    pub bary: [f64; 3],
    pub position: Vec3,
}

/// Walks a straight line of length `‖target‖` from `start` in direction
/// `target` (expressed in `frame`, which must lie in the start face plane),
/// unfolding across every crossed edge. Returns `None` when the walk leaves
/// the mesh boundary or passes through a vertex whose angle sum is not 2π.
pub fn trace_texture_coordinate(
    mesh: &TriMesh,
    start: &SurfaceSample,
    frame: &TangentFrame,
    target: Vec2,
) -> Option<TraceHit> {
    let len = target.norm();
    if !len.is_finite() {
        return None;
    }
    if len == 0.0 {
        return Some(TraceHit {
            face: start.face,
            bary: start.bary,
            position: start.position,
        });
    }
    let n0 = mesh.face_normal(start.face);
    let fr = TangentFrame::from_normal_direction(n0, frame.i);
    let mut dir = (fr.i * target.x + fr.j * target.y) / len;
    let mut face = start.face;
    let mut p = start.position;
    let mut remaining = len;
    let mut entry_edge: Option<usize> = None;
    let mut stalled = false;
    let scale = mesh.face_circumradius(face).max(1e-12);

    for _ in 0..100_000 {
        let v = mesh.face_vertices(face);
        let n = mesh.face_normal(face);
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..3 {
            if entry_edge == Some(k) {
                continue;
            }
            let a = v[k];
            let e = v[(k + 1) % 3] - a;
            let denom = n.dot(&dir.cross(&e));
            if denom.abs() < 1e-15 {
                continue;
            }
            let ap = a - p;
            let s = n.dot(&ap.cross(&e)) / denom;
            let u = n.dot(&ap.cross(&dir)) / denom;
            if s > 1e-12 * scale && (-1e-9..=1.0 + 1e-9).contains(&u) && best.is_none_or(|b| s < b.0) {
                best = Some((s, k, u));
            }
        }
        let Some((s, k, u)) = best else {
            let end = p + dir * remaining;
            let bary = mesh.barycentric(face, &end);
            if bary.iter().all(|&b| b >= -1e-9) {
                return Some(finish(mesh, face, end));
            }
            // the walk starts on the face border and points outward
            if stalled {
                return None;
            }
            stalled = true;
            let here = mesh.barycentric(face, &p);
            let corners = mesh.face(face);
            if let Some(c) = (0..3).find(|&c| here[c] >= 1.0 - 1e-9) {
                let vtx = corners[c];
                let (g, d) = continue_through_vertex(mesh, face, vtx, dir)?;
                face = g;
                dir = d;
                entry_edge = None;
                continue;
            }
            // edge k is opposite corner k + 2
            let k = (0..3).find(|&k| here[(k + 2) % 3].abs() <= 1e-9)?;
            let g = mesh.face_neighbors(face)[k]?;
            dir = unfold_vector(mesh, face, g, &dir)?;
            dir = (dir - mesh.face_normal(g) * mesh.face_normal(g).dot(&dir)).normalize();
            entry_edge = mesh.shared_edge_index(g, face);
            face = g;
            continue;
        };
        stalled = false;
        if s >= remaining {
            let end = p + dir * remaining;
            return Some(finish(mesh, face, end));
        }
        remaining -= s;
        p += dir * s;
        let corners = mesh.face(face);
        let through_vertex = if u <= 1e-9 {
            Some(corners[k])
        } else if u >= 1.0 - 1e-9 {
            Some(corners[(k + 1) % 3])
        } else {
            None
        };
        if let Some(vtx) = through_vertex {
            let (g, d) = continue_through_vertex(mesh, face, vtx, dir)?;
            p = mesh.position(vtx);
            face = g;
            dir = d;
            entry_edge = None;
            // leave the vertex before searching for the next exit
            let step = (1e-9 * scale).min(remaining);
            p += dir * step;
            remaining -= step;
            continue;
        }
        let g = mesh.face_neighbors(face)[k]?;
        dir = unfold_vector(mesh, face, g, &dir)?;
        dir = (dir - mesh.face_normal(g) * mesh.face_normal(g).dot(&dir)).normalize();
        entry_edge = mesh.shared_edge_index(g, face);
        face = g;
    }
    None
}

fn finish(mesh: &TriMesh, face: usize, p: Vec3) -> TraceHit {
    let mut bary = mesh.barycentric(face, &p);
    for b in &mut bary {
        if *b < 0.0 && *b > -1e-9 {
            *b = 0.0;
        }
    }
    let s: f64 = bary.iter().sum();
    for b in &mut bary {
        *b /= s;
    }
    TraceHit {
        face,
        bary,
        position: mesh.point_at(face, bary),
    }
}

/// Continues a straight walk that hits vertex `vtx` from `face`: rotates
/// around the vertex fan until the unfolded direction falls inside a face's
/// corner sector. Only flat interior vertices have a unique continuation.
fn continue_through_vertex(mesh: &TriMesh, face: usize, vtx: usize, dir: Vec3) -> Option<(usize, Vec3)> {
    // angle sum and closedness of the fan
    let mut angle_sum = 0.0;
    let mut f = face;
    let mut fan = Vec::new();
    loop {
        let c = mesh.face(f).iter().position(|&x| x == vtx)?;
        let pv = mesh.position(vtx);
        let t = mesh.face(f);
        let a = mesh.position(t[(c + 1) % 3]) - pv;
        let b = mesh.position(t[(c + 2) % 3]) - pv;
        angle_sum += a.angle(&b);
        fan.push(f);
        // edge (c+2 -> c) is the edge before the corner; cross it to rotate
        let g = mesh.face_neighbors(f)[(c + 2) % 3]?;
        f = g;
        if f == face {
            break;
        }
        if fan.len() > 64 {
            return None;
        }
    }
    if (angle_sum - TAU).abs() > 1e-9 {
        return None;
    }
    let mut d = dir;
    let mut prev = face;
    for &g in fan.iter().skip(1).chain(std::iter::once(&face)) {
        d = unfold_vector(mesh, prev, g, &d)?;
        let n = mesh.face_normal(g);
        d = (d - n * n.dot(&d)).normalize();
        let t = mesh.face(g);
        let c = t.iter().position(|&x| x == vtx)?;
        let pv = mesh.position(vtx);
        let ea = mesh.position(t[(c + 1) % 3]) - pv;
        let eb = mesh.position(t[(c + 2) % 3]) - pv;
        if n.dot(&ea.cross(&d)) >= -1e-12 && n.dot(&d.cross(&eb)) >= -1e-12 {
            return Some((g, d));
        }
        prev = g;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn plane_sample(mesh: &TriMesh, p: Vec3) -> SurfaceSample {
        let f = (0..mesh.num_faces())
            .find(|&f| mesh.barycentric(f, &p).iter().all(|&b| b >= -1e-12))
            .unwrap();
        SurfaceSample::with_frame(mesh, f, mesh.barycentric(f, &p), Vec3::x())
    }

    #[test]
    fn trace_zero_returns_start() {
        let m = shapes::plane_grid(10, 10, 1.0, 1.0);
        let s = plane_sample(&m, Vec3::new(0.43, 0.51, 0.0));
        let hit = trace_texture_coordinate(&m, &s, &s.frame, Vec2::zeros()).unwrap();
        assert_eq!(hit.position, s.position);
    }

    #[test]
    fn trace_on_plane_is_translation() {
        let m = shapes::plane_grid(25, 25, 1.0, 1.0);
        for start in [Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.4312, 0.577, 0.0)] {
            let s = plane_sample(&m, start);
            for t in [Vec2::new(0.018, 0.018), Vec2::new(-0.2, 0.13), Vec2::new(0.3, -0.3)] {
                let hit = trace_texture_coordinate(&m, &s, &s.frame, t).unwrap();
                let want = start + Vec3::new(t.x, t.y, 0.0);
                assert!(
                    (hit.position - want).norm() < 1e-9,
                    "{start:?} {t:?} {:?}",
                    hit.position
                );
            }
        }
    }

    #[test]
    fn trace_off_boundary_is_invalid() {
        let m = shapes::plane_grid(10, 10, 1.0, 1.0);
        let s = plane_sample(&m, Vec3::new(0.9, 0.5, 0.0));
        assert!(trace_texture_coordinate(&m, &s, &s.frame, Vec2::new(0.2, 0.0)).is_none());
    }

    #[test]
    fn plane_patch_membership() {
        let m = shapes::plane_grid(20, 20, 1.0, 1.0);
        let samples: Vec<SurfaceSample> = (1..10)
            .flat_map(|y| (1..10).map(move |x| Vec3::new(x as f64 * 0.1 + 0.003, y as f64 * 0.1 + 0.002, 0.0)))
            .map(|p| plane_sample(&m, p))
            .collect();
        let index = SampleIndex::new(&m, &samples);
        let center = samples[40];
        let patch = extract_geodesic_patch(&m, &samples, &index, &center, 0.2).unwrap();
        let mut want: Vec<usize> = (0..samples.len())
            .filter(|&s| {
                let d = samples[s].position - center.position;
                d.x.abs() < 0.2 && d.y.abs() < 0.2
            })
            .collect();
        let mut got: Vec<usize> = patch.members.iter().map(|m| m.sample).collect();
        want.sort_unstable();
        got.sort_unstable();
        assert_eq!(got, want);
        for mem in &patch.members {
            let d = samples[mem.sample].position - center.position;
            assert!((mem.t - Vec2::new(d.x, d.y)).norm() < 1e-6);
        }
        let c = patch.members.iter().find(|m| m.sample == 40).unwrap();
        assert!(c.t.norm() < 1e-12);
    }

    #[test]
    fn dump_serializes() {
        let m = shapes::plane_grid(4, 4, 1.0, 1.0);
        let s = vec![plane_sample(&m, Vec3::new(0.5, 0.5, 0.0))];
        let idx = SampleIndex::new(&m, &s);
        let p = extract_geodesic_patch(&m, &s, &idx, &s[0], 0.1).unwrap();
        let json = serde_json::to_string(&p.dump()).unwrap();
        assert!(json.contains("\"sample_id\":0"));
    }
}
