//! Fully connected residual autoencoder trained with Adam on the MSE loss.

pub mod adam;
pub mod layer;
pub mod model;
pub mod train;

pub use adam::{linear_lr, AdamParams, AdamState};
pub use layer::{Activation, DenseLayer, LayerGrad, ResidualBlock};
pub use model::{AutoencoderModel, AutoencoderSpec, Gradients, Normalizer};
pub use train::{encode_dataset, relative_reconstruction_error, train, LatentDataset, TrainConfig, TrainReport};
