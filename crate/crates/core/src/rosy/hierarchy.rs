use crate::math::Vec3;
use crate::mesh::TriMesh;

/// One level of the vertex decimation hierarchy.
#[derive(Debug, Clone)]
pub struct Level {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<usize>>,
    /// For each vertex, its vertex on the next coarser level (empty on the
    /// coarsest level).
    pub parent: Vec<usize>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Undirected edges `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}

/// Graph coarsening by repeated maximal matching; `levels[0]` is the input
/// mesh.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
}

impl Hierarchy {
    /// Builds at most `max_levels` levels, stopping early once a level no
    /// longer shrinks.
    pub fn build(mesh: &TriMesh, max_levels: usize) -> Self {
        let mut areas = vec![0.0; mesh.num_vertices()];
        for f in 0..mesh.num_faces() {
            for v in mesh.face(f) {
                areas[v] += mesh.face_area(f) / 3.0;
            }
        }
        let mut levels = vec![Level {
            positions: mesh.positions().to_vec(),
            normals: mesh.vertex_normals().to_vec(),
            areas,
            adjacency: mesh.vertex_adjacency(),
            parent: Vec::new(),
        }];
        while levels.len() < max_levels.max(1) {
            let fine = levels.last_mut().unwrap();
            let (parent, coarse) = coarsen(fine);
            if coarse.len() == fine.len() {
                break;
            }
            fine.parent = parent;
            levels.push(coarse);
        }
        Hierarchy { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

fn coarsen(fine: &Level) -> (Vec<usize>, Level) {
    let n = fine.len();
    let mut edges: Vec<(f64, usize, usize)> = fine
        .edges()
        .map(|(u, v)| {
            let ratio = fine.areas[u].min(fine.areas[v]) / fine.areas[u].max(fine.areas[v]).max(1e-300);
            (fine.normals[u].dot(&fine.normals[v]) * ratio, u, v)
        })
        .collect();
    // best score first; index order breaks ties
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut partner = vec![usize::MAX; n];
    for &(_, u, v) in &edges {
        if partner[u] == usize::MAX && partner[v] == usize::MAX {
            partner[u] = v;
            partner[v] = u;
        }
    }

    let mut parent = vec![usize::MAX; n];
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut areas = Vec::new();
    for u in 0..n {
        if parent[u] != usize::MAX {
            continue;
        }
        let id = positions.len();
        parent[u] = id;
        let p = partner[u];
        if p == usize::MAX {
            positions.push(fine.positions[u]);
            normals.push(fine.normals[u]);
            areas.push(fine.areas[u]);
        } else {
            parent[p] = id;
            let (au, ap) = (fine.areas[u], fine.areas[p]);
            let a = au + ap;
            positions.push((fine.positions[u] * au + fine.positions[p] * ap) / a);
            let ns = fine.normals[u] * au + fine.normals[p] * ap;
            normals.push(if ns.norm() > 1e-9 {
                ns.normalize()
            } else if au >= ap {
                fine.normals[u]
            } else {
                fine.normals[p]
            });
            areas.push(a);
        }
    }

    let mut adjacency = vec![Vec::new(); positions.len()];
    for (u, v) in fine.edges() {
        let (a, b) = (parent[u], parent[v]);
        if a != b {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    for l in &mut adjacency {
        l.sort_unstable();
        l.dedup();
    }
    (
        parent,
        Level {
            positions,
            normals,
            areas,
            adjacency,
            parent: Vec::new(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn levels_shrink_and_preserve_area() {
        let m = shapes::icosphere(3, 1.0);
        let h = Hierarchy::build(&m, 20);
        assert!(h.depth() > 5);
        for w in h.levels.windows(2) {
            assert!(w[1].len() < w[0].len());
            assert!(w[1].len() * 2 >= w[0].len());
            let a0: f64 = w[0].areas.iter().sum();
            let a1: f64 = w[1].areas.iter().sum();
            assert!((a0 - a1).abs() < 1e-9);
        }
        assert!(h.levels.last().unwrap().len() * 10 < h.levels[0].len());
    }

    #[test]
    fn components_never_merge() {
        // two disjoint triangles
        let m = TriMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::x(),
                Vec3::y(),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(6.0, 0.0, 0.0),
                Vec3::new(5.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let h = Hierarchy::build(&m, 10);
        assert_eq!(h.levels.last().unwrap().len(), 2);
    }
}
