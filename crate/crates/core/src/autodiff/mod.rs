//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The operation set is exactly what the feature network, the style
//! transfer losses and the classifiers need: convolution, 2×2 max pooling,
//! relu, affine layers, MSE, Gram matrices, weighted sums, channel
//! concatenation and softmax cross-entropy.

mod adam;
pub(crate) mod kernels;
mod tape;
mod tensor;

pub use adam::{adam_step, adam_step_slice, AdamState};
pub use tape::{softmax_rows, Gradients, Padding, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
