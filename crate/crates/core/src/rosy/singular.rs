use crate::error::{Error, Result};
use crate::math::{signed_angle, smallest_rotation, Vec3};
use crate::mesh::TriMesh;

use super::{rosy_signed_residual, RoSyField};

/// Singular faces with their index in quarter units.
///
/// Around each face (in winding order) the quarter-turn matchings `k` of
/// consecutive corners are summed; a nonzero total modulo 4 marks a
/// singularity, with `1 → +1`, `3 → −1` and `2` resolved to `±2` by the
/// sign of the accumulated turning angle.
pub fn detect_singularities(field: &RoSyField, mesh: &TriMesh) -> Result<Vec<(usize, i32)>> {
    let frames = field.frames();
    let mut out = Vec::new();
    for f in 0..mesh.num_faces() {
        let t = mesh.face(f);
        let mut ksum = 0u32;
        let mut residual = 0.0;
        for c in 0..3 {
            let (a, b) = (t[c], t[(c + 1) % 3]);
            let (delta, k) = rosy_signed_residual(&frames[a], &frames[b])?;
            ksum += k as u32;
            residual += delta;
        }
        let index = match ksum % 4 {
            0 => 0,
            1 => 1,
            3 => -1,
            _ => {
                let normals = [frames[t[0]].n, frames[t[1]].n, frames[t[2]].n];
                let total = residual + face_holonomy(&normals)?;
                if total >= 0.0 {
                    2
                } else {
                    -2
                }
            }
        };
        if index != 0 {
            out.push((f, index));
        }
    }
    Ok(out)
}

/// Rotation angle (about the first normal) picked up by a tangent vector
/// transported with smallest rotations around the closed loop of normals.
pub fn face_holonomy(normals: &[Vec3; 3]) -> Result<f64> {
    let start = crate::math::any_tangent(&normals[0]);
    let mut v = start;
    for c in 0..3 {
        let from = normals[c];
        let to = normals[(c + 1) % 3];
        let r = smallest_rotation(&from, &to).ok_or(Error::AntiparallelNormals)?;
        v = r * v;
    }
    Ok(signed_angle(&start, &v, &normals[0]))
}
