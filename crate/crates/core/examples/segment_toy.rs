//! Trains the surface UNet to tell planes, cylinders and spheres apart.
//!
//! ```text
//! cargo run --release --example segment_toy -- [epochs]
//! ```

use rosynet::toy::{segment_toy, ToyConfig};

fn main() -> rosynet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut cfg = ToyConfig::default();
    if let Some(e) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        cfg.train.epochs = e;
    }
    let (report, _) = segment_toy(&cfg)?;
    for e in &report.log {
        println!("epoch {}: loss {:.4} train accuracy {:.4}", e.epoch, e.loss, e.accuracy);
    }
    println!(
        "held-out accuracy {:.4} (prepare {:.0} s, train {:.0} s)",
        report.test_accuracy, report.prepare_seconds, report.train_seconds
    );
    Ok(())
}
