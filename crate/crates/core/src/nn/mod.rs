//! Minimal differentiable layer stack with exact gradients, sufficient
//! for the two model architectures: fully-connected, 1D convolution,
//! batch normalization, ReLU, and max pooling, plus Adam and a JSON
//! checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use gradcheck::network_gradcheck;
pub use layers::{BatchNorm1d, Conv1d, FullyConnected, Layer, MaxPool1d, Mode, ParamSlot, Relu};
pub use network::{l2_loss, sigmoid, softplus, Network};
pub use tensor::Tensor;
