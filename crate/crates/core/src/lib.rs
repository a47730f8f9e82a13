//! VapSR: a super-resolution network built from vast-receptive-field pixel
//! attention blocks, with hand-written gradients, a toy trainer, image
//! metrics and parameter / Multi-Adds accounting.

pub mod analysis;
pub mod autograd;
mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod nn_ops;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{ModelConfig, Network};
pub use tensor::{Real, Shape, Tensor};
