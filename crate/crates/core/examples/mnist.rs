//! Trains the MNIST classifier with plain or TextureConv convolutions.
//!
//! ```text
//! cargo run --release --example mnist -- [baseline|rosy] [epochs] [train-limit] [lr]
//! ```
//! Data is read from `TXN_DATA_DIR` (default `data/mnist`).

use std::path::PathBuf;

use rosynet::nn::mnist::{mnist_experiment, MnistData, MnistVariant};
use rosynet::nn::train::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: MnistVariant = args
        .first()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(MnistVariant::Rosy);
    let epochs = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let limit = args.get(2).map(|s| s.parse()).transpose()?;
    let lr = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(1e-3);
    let dir = std::env::var_os("TXN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| "data/mnist".into());
    let data = MnistData::load(&dir)?;
    let cfg = TrainConfig {
        epochs,
        lr,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let (report, _) = mnist_experiment(&data, variant, &cfg, limit)?;
    println!(
        "{variant:?}: test accuracy {:.4} after {epochs} epochs ({:.0} s)",
        report.test_accuracy,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
