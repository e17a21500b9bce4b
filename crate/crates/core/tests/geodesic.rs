//! Geodesic patches on curved meshes.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rosynet::geodesic::{extract_geodesic_patch, SampleIndex};
use rosynet::math::Vec2;
use rosynet::mesh::shapes;
use rosynet::rosy::{sample_surface, solve_orientation_field, SamplingMethod, SurfaceSample};
use rosynet::TriMesh;

fn check_quarter_turn(mesh: &TriMesh, spacing: f64, rho: f64, seed: u64) {
    let field = solve_orientation_field(mesh, 8, 10, seed).unwrap();
    let samples = sample_surface(mesh, &field, spacing, SamplingMethod::PoissonDisk, seed).unwrap();
    let index = SampleIndex::new(mesh, &samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let c = samples[rng.random_range(0..samples.len())];
        let turned = SurfaceSample {
            frame: c.frame.rotated_quarter(1),
            ..c
        };
        let a = extract_geodesic_patch(mesh, &samples, &index, &c, rho).unwrap();
        let b = extract_geodesic_patch(mesh, &samples, &index, &turned, rho).unwrap();
        let tb: HashMap<usize, Vec2> = b.members.iter().map(|m| (m.sample, m.t)).collect();
        assert_eq!(a.members.len(), b.members.len());
        for m in &a.members {
            let t = tb[&m.sample];
            assert!((t - Vec2::new(m.t.y, -m.t.x)).norm() < 1e-9, "{:?} vs {:?}", m.t, t);
        }
    }
}

#[test]
fn quarter_turned_center_frame_turns_coordinates_on_a_torus() {
    check_quarter_turn(&shapes::torus(1.0, 0.4, 60, 24), 0.05, 0.25, 1);
}

#[test]
fn quarter_turned_center_frame_turns_coordinates_on_a_cube() {
    check_quarter_turn(&shapes::subdivided_cube(10), 0.05, 0.3, 2);
}

#[test]
fn patch_members_lie_inside_the_square_and_include_the_center() {
    let mesh = shapes::icosphere(4, 1.0);
    let field = solve_orientation_field(&mesh, 8, 10, 0).unwrap();
    let samples = sample_surface(&mesh, &field, 0.05, SamplingMethod::FieldLattice, 0).unwrap();
    let index = SampleIndex::new(&mesh, &samples);
    for (i, c) in samples.iter().enumerate().step_by(37) {
        let p = extract_geodesic_patch(&mesh, &samples, &index, c, 0.2).unwrap();
        assert!(p.members.iter().all(|m| m.t.x.abs() < 0.2 && m.t.y.abs() < 0.2));
        let own = p.members.iter().find(|m| m.sample == i).expect("center is a member");
        assert!(own.t.norm() < 1e-9);
        // unfolding never stretches: coordinates are at least the chord length
        for m in &p.members {
            let chord = (samples[m.sample].position - c.position).norm();
            assert!(m.t.norm() >= chord - 1e-9);
        }
    }
}
