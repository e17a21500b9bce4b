//! Property tests of the geometric and convolution invariants.

use proptest::prelude::*;

use rosynet::conv::{
    group_texture_cells, rosy4m_conv_forward, rotate_grid, texture_conv_forward, Aggregation, TextureConvWeights,
};
use rosynet::math::{Vec2, Vec3};
use rosynet::nn::pointcloud::knn_weights;
use rosynet::rosy::rosy_distance;
use rosynet::TangentFrame;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn frame() -> impl Strategy<Value = TangentFrame> {
    (vec3(), vec3())
        .prop_filter("degenerate", |(n, d)| {
            n.norm() > 0.1 && n.normalize().cross(d).norm() > 0.1
        })
        .prop_map(|(n, d)| TangentFrame::from_normal_direction(n.normalize(), d))
}

/// Distance of `v` to the nearest cell boundary of the 3×3 grid.
fn boundary_gap(v: f64, rho: f64) -> f64 {
    let side = 2.0 * rho / 3.0;
    (0..4)
        .map(|k| (v + rho - k as f64 * side).abs())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn quarter_turn_moves_cells_like_the_grid(x in -0.99..0.99f64, y in -0.99..0.99f64, rho in 0.1..3.0f64) {
        let t = Vec2::new(x * rho, y * rho);
        prop_assume!(boundary_gap(t.x, rho) > 1e-9 * rho && boundary_gap(t.y, rho) > 1e-9 * rho);
        let ((row, col), cat) = group_texture_cells(t, rho).unwrap();
        let ((r2, c2), cat2) = group_texture_cells(Vec2::new(-t.y, t.x), rho).unwrap();
        prop_assert_eq!((r2, c2), (col, 2 - row));
        prop_assert_eq!(cat, cat2);
    }

    #[test]
    fn texture_conv_ignores_quarter_turns(
        pts in prop::collection::vec((-0.999..0.999f64, -0.999..0.999f64), 1..40),
        c_in in 1usize..5,
        c_out in 1usize..5,
        seed in 0u64..1000,
        avg in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agg = if avg { Aggregation::Avg } else { Aggregation::Max };
        let w = TextureConvWeights::<f64>::random(c_in, c_out, agg, &mut rng);
        let coords: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let feats: Vec<f64> = (0..coords.len() * c_in).map(|k| ((k * 7919 + seed as usize) % 97) as f64 / 48.0 - 1.0).collect();
        let (y0, _) = texture_conv_forward(&coords, &feats, 1.0, &w).unwrap();
        let turned: Vec<Vec2> = coords.iter().map(|t| Vec2::new(-t.y, t.x)).collect();
        let (y1, _) = texture_conv_forward(&turned, &feats, 1.0, &w).unwrap();
        for (a, b) in y0.iter().zip(&y1) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        prop_assert!(y0.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rosy4m_ignores_grid_rotation(
        grid in prop::collection::vec(-1.0..1.0f64, 18),
        w in prop::collection::vec(-1.0..1.0f64, 54),
        q in 0usize..4,
    ) {
        let (a, _) = rosy4m_conv_forward(&grid, &w, 2, 3).unwrap();
        let (b, _) = rosy4m_conv_forward(&rotate_grid(&grid, 2, q), &w, 2, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn four_grid_rotations_are_identity(grid in prop::collection::vec(-1.0..1.0f64, 27)) {
        let once = rotate_grid(&grid, 3, 1);
        prop_assert_eq!(rotate_grid(&once, 3, 3), grid.clone());
        prop_assert_eq!(rotate_grid(&grid, 3, 4), grid);
    }

    #[test]
    fn knn_weights_form_a_partition_of_unity(
        pts in prop::collection::vec(vec3(), 1..30),
        q in vec3(),
        k in 1usize..5,
    ) {
        let w = knn_weights(&pts, &q, k);
        prop_assert!(!w.is_empty() && w.len() <= k.min(pts.len()));
        prop_assert!(w.iter().all(|&(i, v)| i < pts.len() && v >= 0.0));
        prop_assert!((w.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frames_are_orthonormal(f in frame(), angle in -7.0..7.0f64, k in -5i32..5) {
        prop_assert!(f.orthonormality_error() < 1e-12);
        prop_assert!(f.rotated(angle).orthonormality_error() < 1e-12);
        prop_assert!(f.rotated_quarter(k).orthonormality_error() < 1e-12);
    }

    #[test]
    fn rosy_distance_ignores_quarter_turns(a in frame(), b in frame(), k in 0i32..4) {
        prop_assume!(a.n.dot(&b.n) > -0.99);
        let d = rosy_distance(&a, &b).unwrap();
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&d));
        let dk = rosy_distance(&a, &b.rotated_quarter(k)).unwrap();
        prop_assert!((d - dk).abs() < 1e-9);
        prop_assert!(rosy_distance(&a, &a.rotated_quarter(k)).unwrap() < 1e-7);
    }
}
