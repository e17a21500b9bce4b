//! Small vector helpers shared by the geometry modules.

use nalgebra::{Unit, UnitQuaternion, Vector2, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Rotates `v` about the unit `axis` by `angle` radians (right-handed).
pub fn rotate_about(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// The smallest rotation taking unit vector `from` onto unit vector `to`.
///
/// Returns `None` when the vectors are antiparallel and the rotation axis is
/// undefined.
pub fn smallest_rotation(from: &Vec3, to: &Vec3) -> Option<UnitQuaternion<f64>> {
    let c = from.dot(to);
    if c < -1.0 + 1e-12 {
        return None;
    }
    let axis = from.cross(to);
    let s = axis.norm();
    if s < 1e-15 {
        return Some(UnitQuaternion::identity());
    }
    let angle = s.atan2(c);
    Some(UnitQuaternion::from_axis_angle(&Unit::new_unchecked(axis / s), angle))
}

/// Any unit vector orthogonal to `n`.
pub fn any_tangent(n: &Vec3) -> Vec3 {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&helper).normalize()
}

/// Removes the `n` component of `v`.
pub fn project_to_plane(v: &Vec3, n: &Vec3) -> Vec3 {
    v - n * n.dot(v)
}

/// Signed angle from `a` to `b` about `n`; both assumed orthogonal to `n`.
pub fn signed_angle(a: &Vec3, b: &Vec3, n: &Vec3) -> f64 {
    n.dot(&a.cross(b)).atan2(a.dot(b))
}

/// Closest point to `p` on triangle `(a, b, c)`, returned as barycentric
/// weights. Ericson, Real-Time Collision Detection, 5.1.5.
pub fn closest_point_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}
