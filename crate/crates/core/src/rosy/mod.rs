//! Four-way rotationally symmetric (4-RoSy) orientation fields: frame
//! matching, the hierarchical extrinsic solve, singularity detection and
//! uniform surface sampling.

mod hierarchy;
mod sampling;
mod singular;
mod solve;

use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{any_tangent, project_to_plane, smallest_rotation, Vec3};
use crate::mesh::TriMesh;

pub use crate::frame::TangentFrame;
pub use hierarchy::{Hierarchy, Level};
pub use sampling::{sample_surface, SamplingMethod, SurfaceSample};
pub use singular::{detect_singularities, face_holonomy};
pub use solve::{solve_orientation_field, LevelEnergy, OrientationSolver, SolveReport};

/// Per-vertex tangent frames, each ambiguous up to quarter turns about its
/// normal, plus the singular faces of the field.
#[derive(Debug, Clone)]
pub struct RoSyField {
    frames: Vec<TangentFrame>,
    singularities: Vec<(usize, i32)>,
}

impl RoSyField {
    /// Wraps per-vertex frames and computes the singular faces.
    pub fn from_frames(mesh: &TriMesh, frames: Vec<TangentFrame>) -> Result<Self> {
        if frames.len() != mesh.num_vertices() {
            return Err(Error::Dimension(format!(
                "{} frames for {} vertices",
                frames.len(),
                mesh.num_vertices()
            )));
        }
        let mut field = RoSyField {
            frames,
            singularities: Vec::new(),
        };
        field.singularities = detect_singularities(&field, mesh)?;
        Ok(field)
    }

    /// Frames whose `i` axis is the projection of `dir(v)` into each vertex
    /// tangent plane.
    pub fn from_directions(mesh: &TriMesh, dir: impl Fn(usize) -> Vec3) -> Result<Self> {
        let frames = (0..mesh.num_vertices())
            .map(|v| TangentFrame::from_normal_direction(mesh.vertex_normal(v), dir(v)))
            .collect();
        Self::from_frames(mesh, frames)
    }

    pub fn frames(&self) -> &[TangentFrame] {
        &self.frames
    }

    pub fn frame(&self, v: usize) -> &TangentFrame {
        &self.frames[v]
    }

    /// Singular faces with their index in quarter units.
    pub fn singularities(&self) -> &[(usize, i32)] {
        &self.singularities
    }

    /// Sum of singularity indices in quarter units.
    pub fn index_sum(&self) -> i32 {
        self.singularities.iter().map(|s| s.1).sum()
    }

    /// Sum over mesh edges of the squared 4-RoSy distance between endpoint
    /// frames.
    pub fn transport_energy(&self, mesh: &TriMesh) -> Result<f64> {
        let mut e = 0.0;
        for (u, nbrs) in mesh.vertex_adjacency().iter().enumerate() {
            for &v in nbrs.iter().filter(|&&v| v > u) {
                e += rosy_distance(&self.frames[u], &self.frames[v])?.powi(2);
            }
        }
        Ok(e)
    }
}

/// Transports `candidate` into the tangent plane of `reference` with the
/// smallest rotation between their normals, then turns it by the number of
/// quarter turns `k` that best aligns its `i` axis with the reference `i`
/// axis. Ties go to the smaller `k`.
pub fn rosy_align(reference: &TangentFrame, candidate: &TangentFrame) -> Result<(TangentFrame, u8)> {
    let rot = smallest_rotation(&candidate.n, &reference.n).ok_or(Error::AntiparallelNormals)?;
    let i = project_to_plane(&(rot * candidate.i), &reference.n).normalize();
    let transported = TangentFrame {
        i,
        j: reference.n.cross(&i),
        n: reference.n,
    };
    // dots of the four rotated i axes with the reference i
    let d = [
        transported.i.dot(&reference.i),
        transported.j.dot(&reference.i),
        -transported.i.dot(&reference.i),
        -transported.j.dot(&reference.i),
    ];
    let mut k = 0;
    for c in 1..4 {
        if d[c] > d[k] + 1e-12 {
            k = c;
        }
    }
    Ok((transported.rotated_quarter(k as i32), k as u8))
}

/// Angle in `[0, π/4]` between two frames modulo quarter turns, measured
/// after transporting `b` into `a`'s tangent plane.
pub fn rosy_distance(a: &TangentFrame, b: &TangentFrame) -> Result<f64> {
    let (aligned, _) = rosy_align(a, b)?;
    let s = a.n.dot(&a.i.cross(&aligned.i)).abs();
    let c = a.i.dot(&aligned.i);
    Ok(s.atan2(c).min(FRAC_PI_4))
}

/// Signed angle in `[-π/4, π/4]` from `a.i` to the best-aligned axis of `b`
/// after transport, measured about `a.n`.
pub(crate) fn rosy_signed_residual(a: &TangentFrame, b: &TangentFrame) -> Result<(f64, u8)> {
    let (aligned, k) = rosy_align(a, b)?;
    let s = a.n.dot(&a.i.cross(&aligned.i));
    let c = a.i.dot(&aligned.i);
    Ok((s.atan2(c), k))
}

/// Each vertex gets an independent uniformly distributed tangent direction.
pub fn random_field(mesh: &TriMesh, seed: u64) -> Result<RoSyField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..mesh.num_vertices())
        .map(|v| {
            let n = mesh.vertex_normal(v);
            let t0 = any_tangent(&n);
            let t1 = n.cross(&t0);
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            TangentFrame::from_normal_direction(n, t0 * theta.cos() + t1 * theta.sin())
        })
        .collect();
    RoSyField::from_frames(mesh, frames)
}

/// Extrinsic 4-RoSy matching of two directions with their normals: the pair
/// among `{q0, n0 × q0}` and `{±q1, ±n1 × q1}` with the largest absolute dot
/// product, second member sign-corrected.
pub(crate) fn compat_orientation(q0: &Vec3, n0: &Vec3, q1: &Vec3, n1: &Vec3) -> (Vec3, Vec3) {
    let a = [*q0, n0.cross(q0)];
    let b = [*q1, n1.cross(q1)];
    let mut best = (0, 0);
    let mut best_score = f64::NEG_INFINITY;
    for (ia, va) in a.iter().enumerate() {
        for (ib, vb) in b.iter().enumerate() {
            let s = va.dot(vb).abs();
            if s > best_score + 1e-15 {
                best_score = s;
                best = (ia, ib);
            }
        }
    }
    let dp = a[best.0].dot(&b[best.1]);
    (a[best.0], b[best.1] * dp.signum())
}

/// Extrinsic matching angle between two directions (in `[0, π/4]` for
/// coplanar frames).
pub(crate) fn extrinsic_angle(q0: &Vec3, n0: &Vec3, q1: &Vec3, n1: &Vec3) -> f64 {
    let (a, b) = compat_orientation(q0, n0, q1, n1);
    a.cross(&b).norm().atan2(a.dot(&b))
}
