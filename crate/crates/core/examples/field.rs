//! Solves a 4-RoSy orientation field and lists its singularities.
//!
//! ```text
//! cargo run --release --example field -- [mesh.obj|mesh.ply]
//! ```
//! Without an argument a torus, a sphere and a genus-2 plate are solved.

use rosynet::mesh::shapes;
use rosynet::rosy::OrientationSolver;
use rosynet::{euler_characteristic, load_mesh, TriMesh};

fn solve(name: &str, mesh: &TriMesh) -> rosynet::Result<()> {
    let (field, report) = OrientationSolver::default().solve(mesh)?;
    println!(
        "{name}: {} vertices, chi {}, energy {:.3} -> {:.3} over {} levels",
        mesh.num_vertices(),
        euler_characteristic(mesh),
        report.initial_energy(),
        report.final_energy(),
        report.levels.len()
    );
    println!(
        "  {} singular faces, index sum {} quarter turns",
        field.singularities().len(),
        field.index_sum()
    );
    for (face, quarters) in field.singularities().iter().take(8) {
        println!("  face {face}: {quarters:+}/4");
    }
    Ok(())
}

fn main() -> rosynet::Result<()> {
    match std::env::args().nth(1) {
        Some(path) => solve(&path, &load_mesh(&path)?),
        None => {
            solve("icosphere", &shapes::icosphere(3, 1.0))?;
            solve("torus", &shapes::torus(1.0, 0.35, 48, 18))?;
            solve("genus-2 plate", &shapes::genus2_plate(3, 1.0))
        }
    }
}
