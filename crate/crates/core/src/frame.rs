use crate::math::{any_tangent, project_to_plane, Vec3};

/// An orthonormal tangent frame `(i, j, n)` with `j = n × i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub i: Vec3,
    pub j: Vec3,
    pub n: Vec3,
}

impl TangentFrame {
    /// Builds a frame from a normal and a direction that is projected into
    /// the tangent plane. Falls back to an arbitrary tangent when the
    /// direction is (nearly) parallel to the normal.
    pub fn from_normal_direction(n: Vec3, dir: Vec3) -> Self {
        let n = n.normalize();
        let t = project_to_plane(&dir, &n);
        let i = if t.norm() > 1e-12 {
            t.normalize()
        } else {
            any_tangent(&n)
        };
        TangentFrame { i, j: n.cross(&i), n }
    }

    /// Frame rotated by `k` quarter turns about its normal (counterclockwise
    /// seen from the normal side).
    pub fn rotated_quarter(&self, k: i32) -> Self {
        let (i, j) = match k.rem_euclid(4) {
            0 => (self.i, self.j),
            1 => (self.j, -self.i),
            2 => (-self.i, -self.j),
            _ => (-self.j, self.i),
        };
        TangentFrame { i, j, n: self.n }
    }

    /// Frame rotated by an arbitrary angle about its normal.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let i = self.i * c + self.j * s;
        TangentFrame {
            i,
            j: self.n.cross(&i),
            n: self.n,
        }
    }

    /// Largest deviation from orthonormality and from `j = n × i`.
    pub fn orthonormality_error(&self) -> f64 {
        [
            (self.i.norm() - 1.0).abs(),
            (self.j.norm() - 1.0).abs(),
            (self.n.norm() - 1.0).abs(),
            self.i.dot(&self.j).abs(),
            self.i.dot(&self.n).abs(),
            self.j.dot(&self.n).abs(),
            (self.n.cross(&self.i) - self.j).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Coordinates of a 3D offset in the `(i, j)` basis.
    pub fn local(&self, v: &Vec3) -> [f64; 2] {
        [self.i.dot(v), self.j.dot(v)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_rotation_cycles() {
        let f = TangentFrame::from_normal_direction(Vec3::z(), Vec3::new(1.0, 0.3, 0.2));
        let r = f.rotated_quarter(1);
        assert!((r.i - f.j).norm() < 1e-15);
        assert!(r.orthonormality_error() < 1e-12);
        let back = r.rotated_quarter(3);
        assert_eq!(back, f);
        let r2 = f.rotated(std::f64::consts::FRAC_PI_2);
        assert!((r2.i - r.i).norm() < 1e-12);
    }
}
