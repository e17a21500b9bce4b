//! Procedural test and demo meshes.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use crate::math::Vec3;

use super::TriMesh;

/// Regular grid in the `z = 0` plane covering `[0, sx] × [0, sy]` with
/// `nx × ny` quads, each split along the same diagonal.
pub fn plane_grid(nx: usize, ny: usize, sx: f64, sy: f64) -> TriMesh {
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for y in 0..=ny {
        for x in 0..=nx {
            positions.push(Vec3::new(sx * x as f64 / nx as f64, sy * y as f64 / ny as f64, 0.0));
        }
    }
    let id = |x: usize, y: usize| (y * (nx + 1) + x) as u32;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            faces.push([id(x, y), id(x + 1, y), id(x + 1, y + 1)]);
            faces.push([id(x, y), id(x + 1, y + 1), id(x, y + 1)]);
        }
    }
    TriMesh::new(positions, faces).expect("plane grid is valid")
}

/// Open cylinder (no caps) of the given radius around the `z` axis, from
/// `z = 0` to `z = height`. Vertices lie on the circle, so the surface is a
/// prism with `n_around` flat sides.
pub fn open_cylinder(radius: f64, height: f64, n_around: usize, n_height: usize) -> TriMesh {
    let mut positions = Vec::new();
    for h in 0..=n_height {
        let z = height * h as f64 / n_height as f64;
        for a in 0..n_around {
            let t = 2.0 * PI * a as f64 / n_around as f64;
            positions.push(Vec3::new(radius * t.cos(), radius * t.sin(), z));
        }
    }
    let id = |a: usize, h: usize| (h * n_around + a % n_around) as u32;
    let mut faces = Vec::new();
    for h in 0..n_height {
        for a in 0..n_around {
            faces.push([id(a, h), id(a + 1, h), id(a + 1, h + 1)]);
            faces.push([id(a, h), id(a + 1, h + 1), id(a, h + 1)]);
        }
    }
    TriMesh::new(positions, faces).expect("cylinder is valid")
}

/// Icosahedron subdivided `levels` times and projected to a sphere.
pub fn icosphere(levels: usize, radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                positions.push(((positions[a as usize] + positions[b as usize]) / 2.0).normalize());
                (positions.len() - 1) as u32
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut positions);
            let bc = midpoint(f[1], f[2], &mut positions);
            let ca = midpoint(f[2], f[0], &mut positions);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    for p in &mut positions {
        *p *= radius;
    }
    TriMesh::new(positions, faces).expect("icosphere is valid")
}

/// Torus around the `z` axis with major radius `major` and tube radius
/// `minor`.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            positions.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(positions, faces).expect("torus is valid")
}

/// Boundary surface of a union of unit voxels (scaled by `cell`), each voxel
/// face split into `subdiv × subdiv` quads. The voxel set must not contain
/// edge-only or vertex-only contacts.
pub fn voxel_surface(cells: &[[i32; 3]], subdiv: usize, cell: f64) -> TriMesh {
    let occupied: HashSet<[i32; 3]> = cells.iter().copied().collect();
    let m = subdiv as i64;
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut positions = Vec::new();
    let mut vid = |p: [i64; 3], positions: &mut Vec<Vec3>| -> u32 {
        *index.entry(p).or_insert_with(|| {
            positions.push(Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) * (cell / m as f64));
            (positions.len() - 1) as u32
        })
    };
    let mut faces = Vec::new();
    for c in cells {
        for axis in 0..3 {
            for sign in [-1i32, 1] {
                let mut nb = *c;
                nb[axis] += sign;
                if occupied.contains(&nb) {
                    continue;
                }
                // in-plane axes (u, v) with u × v pointing outward
                let (mut u, mut v) = ((axis + 1) % 3, (axis + 2) % 3);
                if sign < 0 {
                    std::mem::swap(&mut u, &mut v);
                }
                let mut base = [c[0] as i64 * m, c[1] as i64 * m, c[2] as i64 * m];
                if sign > 0 {
                    base[axis] += m;
                }
                for a in 0..m {
                    for b in 0..m {
                        let corner = |da: i64, db: i64| {
                            let mut p = base;
                            p[u] += a + da;
                            p[v] += b + db;
                            p
                        };
                        let q = [
                            vid(corner(0, 0), &mut positions),
                            vid(corner(1, 0), &mut positions),
                            vid(corner(1, 1), &mut positions),
                            vid(corner(0, 1), &mut positions),
                        ];
                        faces.push([q[0], q[1], q[2]]);
                        faces.push([q[0], q[2], q[3]]);
                    }
                }
            }
        }
    }
    TriMesh::new(positions, faces).expect("voxel surface is valid")
}

/// The unit cube `[0, 1]³` with 8 vertices and 12 triangles.
pub fn unit_cube() -> TriMesh {
    voxel_surface(&[[0, 0, 0]], 1, 1.0)
}

/// Unit cube with each face split into `subdiv × subdiv` quads.
pub fn subdivided_cube(subdiv: usize) -> TriMesh {
    voxel_surface(&[[0, 0, 0]], subdiv, 1.0)
}

/// A one-voxel-thick 3 × 5 plate with two square holes (genus 2).
pub fn genus2_plate(subdiv: usize, cell: f64) -> TriMesh {
    let mut cells = Vec::new();
    for x in 0..3 {
        for y in 0..5 {
            if x == 1 && (y == 1 || y == 3) {
                continue;
            }
            cells.push([x, y, 0]);
        }
    }
    voxel_surface(&cells, subdiv, cell)
}

#[cfg(test)]
mod tests {
    use super::super::euler_characteristic;
    use super::*;

    #[test]
    fn euler_characteristics() {
        assert_eq!(euler_characteristic(&icosphere(2, 1.0)), 2);
        assert_eq!(euler_characteristic(&open_cylinder(1.0, 1.0, 16, 4)), 0);
        assert_eq!(euler_characteristic(&torus(1.0, 0.3, 16, 8)), 0);
        assert_eq!(euler_characteristic(&subdivided_cube(3)), 2);
        assert_eq!(euler_characteristic(&genus2_plate(2, 1.0)), -2);
        let cube = unit_cube();
        assert_eq!((cube.num_vertices(), cube.num_faces()), (8, 12));
    }

    #[test]
    fn closed_shapes_are_outward() {
        for m in [icosphere(1, 1.0), torus(1.0, 0.3, 12, 8), genus2_plate(1, 1.0)] {
            assert!(m.is_closed());
            let mut vol = 0.0;
            for f in 0..m.num_faces() {
                let [a, b, c] = m.face_vertices(f);
                vol += a.dot(&b.cross(&c)) / 6.0;
            }
            assert!(vol > 0.0);
        }
    }
}
