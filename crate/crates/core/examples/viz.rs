//! Writes colored PLY files of an orientation field and of a labeling.
//!
//! ```text
//! cargo run --release --example viz -- [out-dir]
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use rosynet::io::export::{write_field_viz, write_label_viz};
use rosynet::mesh::shapes;
use rosynet::rosy::solve_orientation_field;

fn main() -> rosynet::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let mesh = shapes::torus(1.0, 0.35, 64, 24);
    let field = solve_orientation_field(&mesh, 8, 10, 0)?;
    let path = dir.join("torus_field.ply");
    write_field_viz(&mut BufWriter::new(File::create(&path)?), &mesh, &field)?;
    println!(
        "wrote {} ({} singular faces in red)",
        path.display(),
        field.singularities().len()
    );

    let labels: Vec<u32> = mesh
        .positions()
        .iter()
        .map(|p| ((p.y.atan2(p.x) + 3.2) * 2.0) as u32)
        .collect();
    let path = dir.join("torus_labels.ply");
    write_label_viz(&mut BufWriter::new(File::create(&path)?), &mesh, &labels)?;
    println!("wrote {}", path.display());
    Ok(())
}
