//! Uniform point sampling on the surface, each sample carrying a frame
//! interpolated from the orientation field.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::TangentFrame;
use crate::math::{closest_point_barycentric, project_to_plane, smallest_rotation, Vec3};
use crate::mesh::TriMesh;
use crate::nn::pointcloud::fps;

use super::hierarchy::Hierarchy;
use super::solve::{default_levels, same_lattice_point, solve_position_field};
use super::{compat_orientation, RoSyField};

/// A point on the surface with its face, barycentric coordinates and frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub position: Vec3,
    pub face: usize,
    pub bary: [f64; 3],
    pub frame: TangentFrame,
}

impl SurfaceSample {
    /// Sample at `bary` on `face` with the frame interpolated from `field`.
    pub fn on_face(mesh: &TriMesh, field: &RoSyField, face: usize, bary: [f64; 3]) -> Result<Self> {
        let singular = field.singularities().iter().any(|s| s.0 == face);
        Ok(SurfaceSample {
            position: mesh.point_at(face, bary),
            face,
            bary,
            frame: interpolate_frame(mesh, field, face, bary, singular)?,
        })
    }

    /// Sample at `bary` on `face` with an explicitly given frame, projected
    /// into the face plane.
    pub fn with_frame(mesh: &TriMesh, face: usize, bary: [f64; 3], dir: Vec3) -> Self {
        SurfaceSample {
            position: mesh.point_at(face, bary),
            face,
            bary,
            frame: TangentFrame::from_normal_direction(mesh.face_normal(face), dir),
        }
    }
}

/// Frame at a point of `face`: corner frames are transported into the face
/// plane, matched to the first corner by quarter turns, averaged with the
/// barycentric weights and re-orthonormalized. On singular faces the frame
/// of the nearest corner is used instead.
pub fn interpolate_frame(
    mesh: &TriMesh,
    field: &RoSyField,
    face: usize,
    bary: [f64; 3],
    singular: bool,
) -> Result<TangentFrame> {
    let n = mesh.face_normal(face);
    let corners = mesh.face(face);
    let transported: Vec<Vec3> = corners
        .iter()
        .map(|&v| {
            let fr = field.frame(v);
            let r = smallest_rotation(&fr.n, &n).ok_or(Error::AntiparallelNormals)?;
            Ok(project_to_plane(&(r * fr.i), &n).normalize())
        })
        .collect::<Result<_>>()?;
    if singular {
        let nearest = (0..3)
            .max_by(|&a, &b| bary[a].total_cmp(&bary[b]).then(b.cmp(&a)))
            .unwrap();
        return Ok(TangentFrame::from_normal_direction(n, transported[nearest]));
    }
    let reference = transported[0];
    let mut sum = reference * bary[0];
    for c in 1..3 {
        let (_, aligned) = compat_orientation(&reference, &n, &transported[c], &n);
        sum += aligned * bary[c];
    }
    let dir = if project_to_plane(&sum, &n).norm() > 1e-9 {
        sum
    } else {
        reference
    };
    Ok(TangentFrame::from_normal_direction(n, dir))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMethod {
    /// One sample per lattice point of a hierarchically smoothed position
    /// field aligned with the orientation field.
    FieldLattice,
    /// Dart throwing with Euclidean radius `0.75 · spacing`.
    PoissonDisk,
    /// Furthest point sampling over mesh vertices; `None` uses the count the
    /// lattice method produces.
    Fps { count: Option<usize> },
}

/// Samples the surface at roughly uniform `spacing` (meters).
pub fn sample_surface(
    mesh: &TriMesh,
    field: &RoSyField,
    spacing: f64,
    method: SamplingMethod,
    seed: u64,
) -> Result<Vec<SurfaceSample>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if field.frames().len() != mesh.num_vertices() {
        return Err(Error::Dimension("field does not match mesh".into()));
    }
    let diag = bbox_diagonal(mesh);
    if spacing > diag {
        return Err(Error::InvalidArgument(format!(
            "spacing {spacing} exceeds the bounding box diagonal {diag}"
        )));
    }
    let singular: HashSet<usize> = field.singularities().iter().map(|s| s.0).collect();
    let make = |face: usize, bary: [f64; 3]| -> Result<SurfaceSample> {
        Ok(SurfaceSample {
            position: mesh.point_at(face, bary),
            face,
            bary,
            frame: interpolate_frame(mesh, field, face, bary, singular.contains(&face))?,
        })
    };
    let placed = match method {
        SamplingMethod::FieldLattice => lattice_points(mesh, field, spacing, seed),
        SamplingMethod::PoissonDisk => poisson_disk(mesh, 0.75 * spacing, seed),
        SamplingMethod::Fps { count } => {
            let count = match count {
                Some(c) => c,
                None => lattice_points(mesh, field, spacing, seed).len(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = rng.random_range(0..mesh.num_vertices());
            let vf = mesh.vertex_faces();
            fps(mesh.positions(), count, start)?
                .into_iter()
                .map(|v| {
                    let f = vf[v][0];
                    let mut bary = [0.0; 3];
                    bary[mesh.face(f).iter().position(|&c| c == v).unwrap()] = 1.0;
                    (f, bary)
                })
                .collect()
        }
    };
    placed.into_iter().map(|(f, b)| make(f, b)).collect()
}

fn bbox_diagonal(mesh: &TriMesh) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in mesh.positions() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Lattice points of the position field, as `(face, barycentric)` pairs.
fn lattice_points(mesh: &TriMesh, field: &RoSyField, spacing: f64, seed: u64) -> Vec<(usize, [f64; 3])> {
    let hier = Hierarchy::build(mesh, default_levels(mesh.num_vertices()));
    // restrict the fine directions to every coarser level
    let mut dirs: Vec<Vec<Vec3>> = vec![field.frames().iter().map(|f| f.i).collect()];
    for l in 1..hier.depth() {
        let fine = &hier.levels[l - 1];
        let coarse = &hier.levels[l];
        let mut acc: Vec<Option<Vec3>> = vec![None; coarse.len()];
        for (v, &d) in dirs[l - 1].iter().enumerate() {
            let p = fine.parent[v];
            acc[p] = Some(match acc[p] {
                None => d,
                Some(s) => {
                    let (a, b) = compat_orientation(&s, &coarse.normals[p], &d, &fine.normals[v]);
                    a + b
                }
            });
        }
        let q = acc
            .into_iter()
            .enumerate()
            .map(|(p, s)| TangentFrame::from_normal_direction(coarse.normals[p], s.unwrap()).i)
            .collect();
        dirs.push(q);
    }
    let o = solve_position_field(&hier, &dirs, spacing, 10, seed);

    let fine = &hier.levels[0];
    let n = fine.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for (u, v) in fine.edges() {
        if same_lattice_point(fine, &dirs[0], &o, u, v, spacing) {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        let s = *slot.entry(r).or_insert_with(|| {
            clusters.push((r, Vec::new()));
            clusters.len() - 1
        });
        clusters[s].1.push(v);
    }

    let vf = mesh.vertex_faces();
    let mut out: Vec<(usize, [f64; 3])> = Vec::new();
    let mut grid = SpatialHash::new(0.5 * spacing);
    for (_, members) in clusters {
        let target = members.iter().map(|&v| o[v]).sum::<Vec3>() / members.len() as f64;
        // candidate faces: incident to members and their neighbors
        let mut cand: Vec<usize> = members.iter().flat_map(|&v| vf[v].iter().copied()).collect();
        let ring: Vec<usize> = cand
            .iter()
            .flat_map(|&f| mesh.face_neighbors(f).into_iter().flatten())
            .collect();
        cand.extend(ring);
        cand.sort_unstable();
        cand.dedup();
        let mut best = (f64::INFINITY, 0, [1.0, 0.0, 0.0]);
        for &f in &cand {
            let [a, b, c] = mesh.face_vertices(f);
            let w = closest_point_barycentric(&target, &a, &b, &c);
            let d = (mesh.point_at(f, w) - target).norm_squared();
            if d < best.0 {
                best = (d, f, w);
            }
        }
        let (_, f, w) = best;
        let on_surface = mesh.point_at(f, w);
        // lattice points beyond an open boundary are dropped
        if on_boundary(mesh, f, &w) {
            let r = target - on_surface;
            let tangential = project_to_plane(&r, &mesh.face_normal(f)).norm();
            if tangential > 0.05 * spacing {
                continue;
            }
        }
        if grid.any_within(&on_surface, 0.5 * spacing) {
            continue;
        }
        grid.insert(on_surface);
        out.push((f, w));
    }
    out
}

fn on_boundary(mesh: &TriMesh, f: usize, w: &[f64; 3]) -> bool {
    let nb = mesh.face_neighbors(f);
    // edge k runs from corner k to k+1 and is opposite corner k+2
    (0..3).any(|k| nb[k].is_none() && w[(k + 2) % 3] <= 1e-9)
}

/// Dart throwing on the surface: area-weighted uniform candidates accepted
/// when no accepted sample lies within `radius`.
fn poisson_disk(mesh: &TriMesh, radius: f64, seed: u64) -> Vec<(usize, [f64; 3])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cdf = Vec::with_capacity(mesh.num_faces());
    let mut acc = 0.0;
    for f in 0..mesh.num_faces() {
        acc += mesh.face_area(f);
        cdf.push(acc);
    }
    let attempts = ((50.0 * acc / (radius * radius)).ceil() as usize).max(1000);
    let mut grid = SpatialHash::new(radius);
    let mut out = Vec::new();
    for _ in 0..attempts {
        let r = rng.random::<f64>() * acc;
        let f = cdf.partition_point(|&c| c < r).min(mesh.num_faces() - 1);
        let (s, t): (f64, f64) = (rng.random(), rng.random());
        let su = s.sqrt();
        let bary = [1.0 - su, su * (1.0 - t), su * t];
        let p = mesh.point_at(f, bary);
        if !grid.any_within(&p, radius) {
            grid.insert(p);
            out.push((f, bary));
        }
    }
    out
}

struct SpatialHash {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<Vec3>>,
}

impl SpatialHash {
    fn new(cell: f64) -> Self {
        SpatialHash {
            cell,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Vec3) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push(p);
    }

    fn any_within(&self, p: &Vec3, r: f64) -> bool {
        let k = self.key(p);
        let reach = (r / self.cell).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if list.iter().any(|q| (q - p).norm() < r) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}
