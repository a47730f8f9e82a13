//! Forward kernels for every layer kind in the network.

mod activation;
mod conv;
mod norm;
mod shuffle;

pub use activation::{gelu, gelu_grad_scalar, gelu_scalar, normal_cdf, normal_pdf};
pub use conv::{conv2d, ConvSpec};
pub use norm::{pixel_norm, pixel_norm_forward, PixelNormOutput, PixelNormParams, DEFAULT_EPSILON};
pub use shuffle::{pixel_shuffle, pixel_unshuffle};

pub(crate) use conv::{tap_range, PAR_THRESHOLD};
