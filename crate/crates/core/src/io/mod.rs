//! Configuration files, patch datasets and viewer exports.

pub mod config;
pub mod dataset;
pub mod export;

pub use config::RunConfig;
pub use dataset::PatchDataset;
