//! Hierarchical Gauss–Seidel smoothing of the extrinsic orientation and
//! position fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::TangentFrame;
use crate::math::{any_tangent, project_to_plane, Vec3};
use crate::mesh::TriMesh;

use super::hierarchy::{Hierarchy, Level};
use super::{compat_orientation, extrinsic_angle, RoSyField};

/// Energy of one hierarchy level before and after its smoothing sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEnergy {
    pub level: usize,
    pub vertices: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    /// Coarsest level first.
    pub levels: Vec<LevelEnergy>,
    pub components: usize,
}

impl SolveReport {
    pub fn initial_energy(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.before)
    }

    pub fn final_energy(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.after)
    }
}

/// Configuration of the orientation field solve.
#[derive(Debug, Clone, Copy)]
pub struct OrientationSolver {
    /// Number of hierarchy levels including the input mesh; `None` uses
    /// `ceil(log2 V)`.
    pub levels: Option<usize>,
    pub iterations_per_level: usize,
    pub seed: u64,
    /// Colored parallel Gauss–Seidel. Results differ from the sequential
    /// sweep order.
    pub parallel: bool,
}

impl Default for OrientationSolver {
    fn default() -> Self {
        OrientationSolver {
            levels: None,
            iterations_per_level: 10,
            seed: 0,
            parallel: false,
        }
    }
}

pub(crate) fn default_levels(vertices: usize) -> usize {
    (usize::BITS - vertices.max(1).leading_zeros()) as usize
}

impl OrientationSolver {
    pub fn solve(&self, mesh: &TriMesh) -> Result<(RoSyField, SolveReport)> {
        let (hier, dirs, report) = self.solve_hierarchy(mesh)?;
        let fine = &hier.levels[0];
        let frames = (0..fine.len())
            .map(|v| TangentFrame::from_normal_direction(fine.normals[v], dirs[0][v]))
            .collect();
        Ok((RoSyField::from_frames(mesh, frames)?, report))
    }

    /// Returns the hierarchy and the direction field on every level.
    pub(crate) fn solve_hierarchy(&self, mesh: &TriMesh) -> Result<(Hierarchy, Vec<Vec<Vec3>>, SolveReport)> {
        if mesh.num_vertices() == 0 || mesh.num_faces() == 0 {
            return Err(Error::EmptyMesh);
        }
        let levels = self.levels.unwrap_or_else(|| default_levels(mesh.num_vertices()));
        if levels == 0 {
            return Err(Error::InvalidArgument("levels must be at least 1".into()));
        }
        let hier = Hierarchy::build(mesh, levels);
        let components = hier.levels.last().map_or(0, |l| l.len());
        let fine_components = count_components(&hier.levels[0]);
        if fine_components > 1 {
            log::warn!("mesh has {fine_components} connected components; each is solved independently");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let coarsest = hier.levels.last().unwrap();
        let mut q: Vec<Vec3> = (0..coarsest.len())
            .map(|v| random_tangent(&mut rng, &coarsest.normals[v]))
            .collect();

        let mut per_level = vec![Vec::new(); hier.depth()];
        let mut report = SolveReport {
            levels: Vec::new(),
            components,
        };
        for l in (0..hier.depth()).rev() {
            let level = &hier.levels[l];
            if l + 1 < hier.depth() {
                q = (0..level.len())
                    .map(|v| prolong_direction(&q[level.parent[v]], &level.normals[v]))
                    .collect();
            }
            let before = orientation_energy(level, &q);
            if self.parallel {
                let colors = greedy_coloring(level);
                for _ in 0..self.iterations_per_level {
                    for class in &colors {
                        let updates: Vec<(usize, Vec3)> = class
                            .par_iter()
                            .map(|&v| (v, smooth_orientation(level, &q, v)))
                            .collect();
                        for (v, d) in updates {
                            q[v] = d;
                        }
                    }
                }
            } else {
                for _ in 0..self.iterations_per_level {
                    for v in 0..level.len() {
                        q[v] = smooth_orientation(level, &q, v);
                    }
                }
            }
            let after = orientation_energy(level, &q);
            report.levels.push(LevelEnergy {
                level: l,
                vertices: level.len(),
                before,
                after,
            });
            per_level[l] = q.clone();
        }
        Ok((hier, per_level, report))
    }
}

/// Solves the extrinsic 4-RoSy field with sequential, deterministic sweeps.
pub fn solve_orientation_field(
    mesh: &TriMesh,
    levels: usize,
    iterations_per_level: usize,
    seed: u64,
) -> Result<RoSyField> {
    let solver = OrientationSolver {
        levels: Some(levels),
        iterations_per_level,
        seed,
        parallel: false,
    };
    solver.solve(mesh).map(|(f, _)| f)
}

fn random_tangent(rng: &mut ChaCha8Rng, n: &Vec3) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let t = project_to_plane(&v, n);
        let len = t.norm();
        if v.norm() <= 1.0 && len > 1e-3 {
            return t / len;
        }
    }
}

fn prolong_direction(parent: &Vec3, n: &Vec3) -> Vec3 {
    let t = project_to_plane(parent, n);
    let len = t.norm();
    if len > 1e-9 {
        t / len
    } else {
        any_tangent(n)
    }
}

fn local_orientation_energy(level: &Level, q: &[Vec3], v: usize, qv: &Vec3) -> f64 {
    let n = &level.normals[v];
    level.adjacency[v]
        .iter()
        .map(|&u| extrinsic_angle(qv, n, &q[u], &level.normals[u]).powi(2))
        .sum()
}

/// One Gauss–Seidel update: the weighted average of extrinsically matched
/// neighbor directions, accepted only if the local energy does not grow.
fn smooth_orientation(level: &Level, q: &[Vec3], v: usize) -> Vec3 {
    let n = level.normals[v];
    let mut sum = q[v];
    let mut weight = 0.0;
    for &u in &level.adjacency[v] {
        let (a, b) = compat_orientation(&sum, &n, &q[u], &level.normals[u]);
        sum = a * weight + b;
        sum = project_to_plane(&sum, &n);
        weight += 1.0;
        let len = sum.norm();
        if len > 1e-30 {
            sum /= len;
        }
    }
    if weight == 0.0 || sum.norm() < 0.5 {
        return q[v];
    }
    let old = local_orientation_energy(level, q, v, &q[v]);
    let new = local_orientation_energy(level, q, v, &sum);
    if new <= old {
        sum
    } else {
        q[v]
    }
}

/// `Σ_edges angle²` of the extrinsic matching on one level.
pub(crate) fn orientation_energy(level: &Level, q: &[Vec3]) -> f64 {
    level
        .edges()
        .map(|(u, v)| extrinsic_angle(&q[u], &level.normals[u], &q[v], &level.normals[v]).powi(2))
        .sum()
}

fn greedy_coloring(level: &Level) -> Vec<Vec<usize>> {
    let mut color = vec![usize::MAX; level.len()];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for v in 0..level.len() {
        let used: Vec<usize> = level.adjacency[v].iter().map(|&u| color[u]).collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        color[v] = c;
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(v);
    }
    classes
}

fn count_components(level: &Level) -> usize {
    let mut seen = vec![false; level.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..level.len() {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &u in &level.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

// ---------------------------------------------------------------------------
// position field

fn middle_point(p0: &Vec3, n0: &Vec3, p1: &Vec3, n1: &Vec3) -> Vec3 {
    let n0p0 = n0.dot(p0);
    let n0p1 = n0.dot(p1);
    let n1p1 = n1.dot(p1);
    let n1p0 = n1.dot(p0);
    let n0n1 = n0.dot(n1);
    let denom = 1.0 / (1.0 - n0n1 * n0n1 + 1e-4);
    let lambda0 = 2.0 * (n0p1 - n0p0 - n0n1 * (n1p0 - n1p1)) * denom;
    let lambda1 = 2.0 * (n1p0 - n1p1 - n0n1 * (n0p1 - n0p0)) * denom;
    (p0 + p1) * 0.5 - (n0 * lambda0 + n1 * lambda1) * 0.25
}

fn position_floor(o: &Vec3, q: &Vec3, n: &Vec3, p: &Vec3, scale: f64) -> Vec3 {
    let t = n.cross(q);
    let d = p - o;
    o + q * ((q.dot(&d) / scale).floor() * scale) + t * ((t.dot(&d) / scale).floor() * scale)
}

/// Nearest integer with halves rounded toward zero.
pub(crate) fn round_half_toward_zero(x: f64) -> f64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 {
        x.trunc()
    } else {
        r
    }
}

/// Lattice point of the lattice through `o` (axes `q`, `n × q`, pitch
/// `scale`) nearest to `p`.
pub(crate) fn position_round(o: &Vec3, q: &Vec3, n: &Vec3, p: &Vec3, scale: f64) -> Vec3 {
    let t = n.cross(q);
    let d = p - o;
    o + q * (round_half_toward_zero(q.dot(&d) / scale) * scale)
        + t * (round_half_toward_zero(t.dot(&d) / scale) * scale)
}

#[allow(clippy::too_many_arguments)]
fn compat_position(
    p0: &Vec3,
    n0: &Vec3,
    q0: &Vec3,
    o0: &Vec3,
    p1: &Vec3,
    n1: &Vec3,
    q1: &Vec3,
    o1: &Vec3,
    scale: f64,
) -> (Vec3, Vec3) {
    let t0 = n0.cross(q0);
    let t1 = n1.cross(q1);
    let middle = middle_point(p0, n0, p1, n1);
    let o0p = position_floor(o0, q0, n0, &middle, scale);
    let o1p = position_floor(o1, q1, n1, &middle, scale);
    let mut best = (f64::INFINITY, o0p, o1p);
    for i in 0..4 {
        let a = o0p + (q0 * (i & 1) as f64 + t0 * ((i & 2) >> 1) as f64) * scale;
        for j in 0..4 {
            let b = o1p + (q1 * (j & 1) as f64 + t1 * ((j & 2) >> 1) as f64) * scale;
            let d = (a - b).norm_squared();
            if d < best.0 {
                best = (d, a, b);
            }
        }
    }
    (best.1, best.2)
}

/// Solves a lattice-snapped position field on every level of `hier`
/// (coarse to fine) given directions on every level. Returns the fine-level
/// positions.
pub(crate) fn solve_position_field(
    hier: &Hierarchy,
    dirs: &[Vec<Vec3>],
    scale: f64,
    iterations: usize,
    seed: u64,
) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let coarsest = hier.levels.last().unwrap();
    let qc = dirs.last().unwrap();
    let mut o: Vec<Vec3> = (0..coarsest.len())
        .map(|v| {
            let n = coarsest.normals[v];
            let t = n.cross(&qc[v]);
            let p = coarsest.positions[v];
            let off = qc[v] * ((rng.random::<f64>() - 0.5) * scale) + t * ((rng.random::<f64>() - 0.5) * scale);
            position_round(&(p + off), &qc[v], &n, &p, scale)
        })
        .collect();
    for l in (0..hier.depth()).rev() {
        let level = &hier.levels[l];
        let q = &dirs[l];
        if l + 1 < hier.depth() {
            o = (0..level.len())
                .map(|v| {
                    let parent = o[level.parent[v]];
                    let n = level.normals[v];
                    parent - n * n.dot(&(parent - level.positions[v]))
                })
                .collect();
        }
        for _ in 0..iterations {
            for v in 0..level.len() {
                o[v] = smooth_position(level, q, &o, v, scale);
            }
        }
    }
    o
}

fn smooth_position(level: &Level, q: &[Vec3], o: &[Vec3], v: usize, scale: f64) -> Vec3 {
    let n = level.normals[v];
    let p = level.positions[v];
    let qv = q[v];
    let mut sum = o[v];
    let mut weight = 0.0;
    for &u in &level.adjacency[v] {
        let nu = level.normals[u];
        let (_, qu) = compat_orientation(&qv, &n, &q[u], &nu);
        let (a, b) = compat_position(&p, &n, &qv, &sum, &level.positions[u], &nu, &qu, &o[u], scale);
        sum = (a * weight + b) / (weight + 1.0);
        weight += 1.0;
        sum -= n * n.dot(&(sum - p));
    }
    if weight > 0.0 {
        position_round(&sum, &qv, &n, &p, scale)
    } else {
        o[v]
    }
}

/// Whether `v` and `u` snapped to the same lattice point: the nearest pair
/// of points of their two lattices around the edge coincides with both.
pub(crate) fn same_lattice_point(level: &Level, q: &[Vec3], o: &[Vec3], v: usize, u: usize, scale: f64) -> bool {
    let (_, qu) = compat_orientation(&q[v], &level.normals[v], &q[u], &level.normals[u]);
    let (a, b) = compat_position(
        &level.positions[v],
        &level.normals[v],
        &q[v],
        &o[v],
        &level.positions[u],
        &level.normals[u],
        &qu,
        &o[u],
        scale,
    );
    let tol = 0.5 * scale;
    (a - o[v]).norm() < tol && (b - o[u]).norm() < tol && (a - b).norm() < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn rounding_ties_toward_zero() {
        assert_eq!(round_half_toward_zero(0.5), 0.0);
        assert_eq!(round_half_toward_zero(-0.5), 0.0);
        assert_eq!(round_half_toward_zero(1.5), 1.0);
        assert_eq!(round_half_toward_zero(-2.5), -2.0);
        assert_eq!(round_half_toward_zero(0.6), 1.0);
    }

    #[test]
    fn energy_never_increases_per_level() {
        let m = shapes::torus(1.0, 0.35, 40, 16);
        let solver = OrientationSolver {
            seed: 5,
            ..Default::default()
        };
        let (_, report) = solver.solve(&m).unwrap();
        for l in &report.levels {
            assert!(l.after <= l.before, "{l:?}");
        }
        assert!(report.final_energy() <= report.initial_energy());
    }

    #[test]
    fn planar_grid_converges_to_constant_field() {
        let m = shapes::plane_grid(20, 20, 1.0, 1.0);
        let f = solve_orientation_field(&m, 6, 200, 1).unwrap();
        for (u, v) in m
            .faces()
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        {
            let d = crate::rosy::rosy_distance(f.frame(u as usize), f.frame(v as usize)).unwrap();
            assert!(d < 1e-9, "edge {u}-{v}: {d}");
        }
        assert!(f.singularities().is_empty());
    }

    #[test]
    fn sequential_solve_is_deterministic() {
        let m = shapes::icosphere(2, 1.0);
        let a = solve_orientation_field(&m, 5, 5, 9).unwrap();
        let b = solve_orientation_field(&m, 5, 5, 9).unwrap();
        assert_eq!(a.frames(), b.frames());
    }

    #[test]
    fn parallel_solve_keeps_monotone_energy() {
        let m = shapes::icosphere(3, 1.0);
        let solver = OrientationSolver {
            parallel: true,
            seed: 2,
            ..Default::default()
        };
        let (field, report) = solver.solve(&m).unwrap();
        assert!(report.levels.iter().all(|l| l.after <= l.before));
        assert_eq!(field.index_sum(), 8);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let m = shapes::plane_grid(1, 1, 1.0, 1.0);
        let solver = OrientationSolver {
            levels: Some(0),
            ..Default::default()
        };
        assert!(solver.solve(&m).is_err());
    }
}
