//! The 1-D convolutional segmentation network.
//!
//! Everything is written out by hand for this one architecture family: a chain
//! of same-padded convolutions followed by a per-time-step softmax over the four
//! output channels (P, QRS, T, background). Gradients are derived analytically
//! and checked against finite differences in the tests.

mod checkpoint;
mod layer;
mod loss;
mod model;
mod optim;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use layer::{conv1d_backward, conv1d_forward, Activation, ConvLayer, LayerSpec};
pub use loss::{cross_entropy_loss, log_softmax_columns, softmax_columns};
pub use model::{Architecture, Gradients, Model};
pub use optim::{RmsProp, RmsPropConfig};
pub use tensor::Tensor1d;

/// Number of output channels: P, QRS, T and background.
pub const OUTPUT_CHANNELS: usize = 4;
/// Index of the background channel.
pub const BACKGROUND: usize = 3;
