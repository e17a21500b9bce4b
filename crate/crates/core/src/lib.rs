//! Rotation-invariant texture convolution on triangle meshes.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conv;
pub mod error;
pub mod frame;
pub mod geodesic;
pub mod io;
pub mod math;
pub mod mesh;
pub mod nn;
pub mod rosy;
pub mod signal;
pub mod toy;

pub use error::{Error, Result};
pub use frame::TangentFrame;
pub use mesh::{euler_characteristic, load_mesh, unfold_frame_across_edge, TriMesh};
