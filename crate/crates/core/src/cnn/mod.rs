//! Convolutional regressor from beam intensity to label vector.

pub mod checkpoint;
pub mod kernels;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use layers::{conv2d_backward, conv2d_forward, maxpool2, maxpool2_backward, mse_loss, relu, sigmoid};
pub use network::{image_input, ConvBlock, LayerParams, Network, NetworkConfig, NetworkWeights};
pub use tensor::{Scalar, Tensor};
pub use train::{train, EpochStats, TrainConfig};
