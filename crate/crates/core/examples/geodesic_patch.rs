//! Extracts a geodesic patch next to a cube corner and prints it as JSON.
//!
//! Samples across the corner appear once, at the coordinate of the
//! shortest unfolding.
//!
//! ```text
//! cargo run --release --example geodesic_patch -- [rho]
//! ```

use rosynet::geodesic::{extract_geodesic_patch, SampleIndex};
use rosynet::math::Vec3;
use rosynet::mesh::shapes;
use rosynet::rosy::{sample_surface, solve_orientation_field, SamplingMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let mesh = shapes::subdivided_cube(16);
    let field = solve_orientation_field(&mesh, 8, 10, 0)?;
    let samples = sample_surface(&mesh, &field, 0.04, SamplingMethod::PoissonDisk, 1)?;
    let index = SampleIndex::new(&mesh, &samples);
    let corner = Vec3::new(1.0, 1.0, 1.0);
    let center = samples
        .iter()
        .min_by(|a, b| {
            let da = ((a.position - corner).norm() - 0.1).abs();
            let db = ((b.position - corner).norm() - 0.1).abs();
            da.total_cmp(&db)
        })
        .expect("samples");
    let patch = extract_geodesic_patch(&mesh, &samples, &index, center, rho)?;
    eprintln!(
        "center {:.3?}, {} unfolded faces, {} members",
        center.position.as_slice(),
        patch.faces.len(),
        patch.members.len()
    );
    println!("{}", serde_json::to_string_pretty(&patch.dump())?);
    Ok(())
}
