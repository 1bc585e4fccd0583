//! Minimal differentiable computation for small networks.
//!
//! A [`Tape`] records batched tensor operations and pulls gradients back from
//! a scalar loss. [`Network`] stacks dense, 1-D convolution and max-pooling
//! layers on top of it and can also propagate a forward-mode tangent through
//! dense stacks, which is how time derivatives of network outputs enter a
//! loss. [`Adam`] updates parameters and [`Checkpoint`] stores them as text.

mod adam;
mod checkpoint;
mod error;
mod network;
mod tape;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{file_sha256, Checkpoint};
pub use error::{Error, Result};
pub use network::{Activation, Layer, LayerSpec, Network};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
