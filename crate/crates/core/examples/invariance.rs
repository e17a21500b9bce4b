//! Checks that TextureConv ignores quarter turns of the patch coordinates.
//!
//! ```text
//! cargo run --release --example invariance
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosynet::conv::{texture_conv_forward, Aggregation, TextureConvWeights};
use rosynet::math::Vec2;

fn main() -> rosynet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (points, c_in, c_out, rho) = (30, 4, 6, 1.0);
    let coords: Vec<Vec2> = (0..points)
        .map(|_| Vec2::new(rng.random_range(-rho..rho), rng.random_range(-rho..rho)))
        .collect();
    let features: Vec<f64> = (0..points * c_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    for agg in [Aggregation::Max, Aggregation::Avg] {
        let w = TextureConvWeights::<f64>::random(c_in, c_out, agg, &mut rng);
        let (base, _) = texture_conv_forward(&coords, &features, rho, &w)?;
        let mut turned = coords.clone();
        for k in 1..4 {
            turned = turned.iter().map(|t| Vec2::new(-t.y, t.x)).collect();
            let (y, _) = texture_conv_forward(&turned, &features, rho, &w)?;
            let diff = y.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            println!("{agg:?}: rotated by {k}/4 turn, max output difference {diff:.2e}");
        }
        let skew: Vec<Vec2> = coords
            .iter()
            .map(|t| Vec2::new(t.x * 0.8 - t.y * 0.6, t.x * 0.6 + t.y * 0.8))
            .collect();
        let (y, _) = texture_conv_forward(&skew, &features, rho, &w)?;
        let diff = y.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{agg:?}: rotated by 37 degrees, max output difference {diff:.2e}");
    }
    Ok(())
}
