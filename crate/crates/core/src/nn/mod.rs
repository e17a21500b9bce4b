//! Learning components: tensors and layers with explicit backward passes,
//! the patch encoder, the hierarchical point network and the MNIST
//! experiment.

pub mod encoder;
pub mod layers;
pub mod mnist;
pub mod pointcloud;
pub mod tensor;
pub mod train;
pub mod unet;

pub use tensor::{Param, Real, Tensor};
