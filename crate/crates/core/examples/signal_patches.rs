//! Resamples vertex colors into N×N patches and writes a patch dataset.
//!
//! ```text
//! cargo run --release --example signal_patches -- [out.bin]
//! ```

use rosynet::io::PatchDataset;
use rosynet::math::Vec3;
use rosynet::mesh::shapes;
use rosynet::rosy::{sample_surface, solve_orientation_field, SamplingMethod};
use rosynet::signal::{batch_patches, SignalSource};

fn main() -> rosynet::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "patches.bin".into());
    let sphere = shapes::icosphere(4, 1.0);
    let colors = sphere
        .positions()
        .iter()
        .map(|p| {
            Vec3::new(
                0.5 + 0.5 * (6.0 * p.x).sin(),
                0.5 + 0.5 * p.y,
                0.5 + 0.5 * (4.0 * p.z).cos(),
            )
        })
        .collect();
    let mesh = sphere.with_colors(colors)?;
    let field = solve_orientation_field(&mesh, 8, 10, 0)?;
    let samples = sample_surface(&mesh, &field, 0.15, SamplingMethod::FieldLattice, 0)?;
    let (n, d) = (8, 0.02);
    let source = SignalSource::VertexColor;
    let patches = batch_patches(&mesh, &samples, n, d, &source, 1)?;
    let ds = PatchDataset::from_patches(&samples, &patches, n, d, &source)?;
    ds.write(out.as_ref())?;
    println!(
        "{} patches of {n}x{n}x{}, mask density {:.3}, wrote {out} ({} bytes)",
        patches.len(),
        source.channels(),
        ds.mask_density(),
        ds.file_len()
    );
    let first = &patches[0];
    for row in 0..n {
        let line: String = (0..n)
            .map(|col| {
                if first.valid(row, col) {
                    format!("{:.2} ", first.value(row, col)[0])
                } else {
                    "  -  ".into()
                }
            })
            .collect();
        println!("  {line}");
    }
    Ok(())
}
