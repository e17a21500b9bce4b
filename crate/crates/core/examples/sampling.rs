//! Compares the three surface sampling methods on a subdivided cube.
//!
//! ```text
//! cargo run --release --example sampling -- [spacing]
//! ```

use rosynet::mesh::shapes;
use rosynet::rosy::{sample_surface, solve_orientation_field, SamplingMethod};

fn main() -> rosynet::Result<()> {
    let spacing: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let mesh = shapes::subdivided_cube(20);
    let field = solve_orientation_field(&mesh, 8, 10, 0)?;
    for (name, method) in [
        ("lattice", SamplingMethod::FieldLattice),
        ("poisson", SamplingMethod::PoissonDisk),
        ("fps", SamplingMethod::Fps { count: None }),
    ] {
        let samples = sample_surface(&mesh, &field, spacing, method, 0)?;
        let mut nearest = Vec::with_capacity(samples.len());
        for (i, a) in samples.iter().enumerate() {
            let d = samples
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (a.position - b.position).norm())
                .fold(f64::INFINITY, f64::min);
            nearest.push(d);
        }
        let mean = nearest.iter().sum::<f64>() / nearest.len() as f64;
        let min = nearest.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "{name:>8}: {:5} samples, nearest neighbour mean {mean:.4} min {min:.4} (spacing {spacing})",
            samples.len()
        );
    }
    Ok(())
}
