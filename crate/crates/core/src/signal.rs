//! Resampling of the surface signal into an oriented `N × N` grid around
//! each sample.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::TangentFrame;
use crate::geodesic::{trace_texture_coordinate, unfold_faces, FaceRecord};
use crate::math::{Vec2, Vec3};
use crate::mesh::TriMesh;
use crate::rosy::SurfaceSample;

/// Signal evaluated at surface points.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// Barycentric interpolation of per-vertex RGB.
    VertexColor,
    /// Bilinear lookup in the texture image at the interpolated uv.
    TextureAtlas,
    /// Interpolated unit vertex normal.
    Normal,
    /// The same vector everywhere.
    Constant(Vec<f64>),
}

impl SignalSource {
    pub fn channels(&self) -> usize {
        match self {
            SignalSource::Constant(v) => v.len(),
            _ => 3,
        }
    }

    /// Checks that the mesh carries what this source reads.
    pub fn check(&self, mesh: &TriMesh) -> Result<()> {
        match self {
            SignalSource::VertexColor if mesh.colors().is_none() => Err(Error::MissingSource("vertex color")),
            SignalSource::TextureAtlas if mesh.texture().is_none() || mesh.uvs().is_none() => {
                Err(Error::MissingSource("texture"))
            }
            SignalSource::Constant(v) if v.is_empty() => Err(Error::InvalidArgument(
                "constant signal needs at least one channel".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Signal value at barycentric `bary` on `face`.
    pub fn evaluate(&self, mesh: &TriMesh, face: usize, bary: [f64; 3], out: &mut [f32]) {
        let t = mesh.face(face);
        let v3 = match self {
            SignalSource::VertexColor => {
                let c = mesh.colors().expect("checked");
                c[t[0]] * bary[0] + c[t[1]] * bary[1] + c[t[2]] * bary[2]
            }
            SignalSource::TextureAtlas => {
                let uv = mesh.uvs().expect("checked")[face];
                let at: Vec2 = uv[0] * bary[0] + uv[1] * bary[1] + uv[2] * bary[2];
                mesh.texture().expect("checked").sample(&at)
            }
            SignalSource::Normal => {
                let n = mesh.vertex_normal(t[0]) * bary[0]
                    + mesh.vertex_normal(t[1]) * bary[1]
                    + mesh.vertex_normal(t[2]) * bary[2];
                if n.norm() > 1e-12 {
                    n.normalize()
                } else {
                    mesh.face_normal(face)
                }
            }
            SignalSource::Constant(v) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = *x as f32;
                }
                return;
            }
        };
        out[0] = v3.x as f32;
        out[1] = v3.y as f32;
        out[2] = v3.z as f32;
    }
}

/// An `N × N × C` signal grid. Cell `(row, col)` sits at texture
/// coordinate `((col − N/2 + ½)·d, (row − N/2 + ½)·d)`; values are stored
/// row-major with channels innermost. Masked cells hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPatch {
    pub n: usize,
    pub channels: usize,
    pub values: Vec<f32>,
    pub mask: Vec<bool>,
    pub center: usize,
    pub frame: TangentFrame,
}

impl SignalPatch {
    pub fn value(&self, row: usize, col: usize) -> &[f32] {
        let o = (row * self.n + col) * self.channels;
        &self.values[o..o + self.channels]
    }

    pub fn valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.n + col]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// An all-masked patch.
    pub fn empty(n: usize, channels: usize, center: usize, frame: TangentFrame) -> Self {
        SignalPatch {
            n,
            channels,
            values: vec![0.0; n * n * channels],
            mask: vec![false; n * n],
            center,
            frame,
        }
    }
}

/// Texture coordinate of grid cell `(row, col)`.
pub fn grid_coordinate(n: usize, d: f64, row: usize, col: usize) -> Vec2 {
    let h = (n / 2) as f64;
    Vec2::new((col as f64 - h + 0.5) * d, (row as f64 - h + 0.5) * d)
}

pub(crate) fn validate_grid(n: usize, d: f64) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "grid size N must be even and >= 2, got {n}"
        )));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pixel pitch d must be positive, got {d}"
        )));
    }
    Ok(())
}

/// Resamples `source` on the `N × N` grid of pitch `d` around `sample`.
///
/// Each cell is located by a straight walk from the sample; a hit counts only
/// when the shortest unfolding of the hit face maps it back within half a
/// pixel of the requested coordinate, which masks walks that cross the seam
/// at a cone singularity.
pub fn sample_signal_patch(
    mesh: &TriMesh,
    sample: &SurfaceSample,
    center: usize,
    n: usize,
    d: f64,
    source: &SignalSource,
) -> Result<SignalPatch> {
    validate_grid(n, d)?;
    source.check(mesh)?;
    let channels = source.channels();
    let frame = TangentFrame::from_normal_direction(mesh.face_normal(sample.face), sample.frame.i);
    let reach = SQRT_2 * (n as f64 / 2.0) * d + d;
    let records = unfold_faces(mesh, sample, reach)?;
    let lookup: HashMap<usize, &FaceRecord> = records.iter().map(|r| (r.face, r)).collect();

    let mut patch = SignalPatch::empty(n, channels, center, frame);
    for row in 0..n {
        for col in 0..n {
            let target = grid_coordinate(n, d, row, col);
            let Some(hit) = trace_texture_coordinate(mesh, sample, &frame, target) else {
                continue;
            };
            let Some(rec) = lookup.get(&hit.face) else {
                continue;
            };
            if (rec.coordinate(mesh, &hit.position) - target).norm() > 0.5 * d {
                continue;
            }
            let cell = row * n + col;
            patch.mask[cell] = true;
            source.evaluate(
                mesh,
                hit.face,
                hit.bary,
                &mut patch.values[cell * channels..(cell + 1) * channels],
            );
        }
    }
    Ok(patch)
}

/// Resamples every sample; failures become all-masked patches. Order is
/// preserved. `threads = 1` runs on the calling thread.
pub fn batch_patches(
    mesh: &TriMesh,
    samples: &[SurfaceSample],
    n: usize,
    d: f64,
    source: &SignalSource,
    threads: usize,
) -> Result<Vec<SignalPatch>> {
    validate_grid(n, d)?;
    source.check(mesh)?;
    let one = |(i, s): (usize, &SurfaceSample)| {
        sample_signal_patch(mesh, s, i, n, d, source).unwrap_or_else(|e| {
            log::warn!("sample {i}: {e}; patch masked");
            SignalPatch::empty(n, source.channels(), i, s.frame)
        })
    };
    if threads <= 1 {
        return Ok(samples.iter().enumerate().map(one).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(|| samples.par_iter().enumerate().map(one).collect()))
}

/// Mean position helper for tests and examples.
pub fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len().max(1) as f64
}
