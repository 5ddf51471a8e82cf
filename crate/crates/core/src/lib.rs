//! Probabilistic surrogate for nonlinear solid mechanics.
//!
//! Full-field FEM displacements are compressed by a residual autoencoder;
//! independent Matérn-5/2 Gaussian processes map loads to the latent
//! coordinates, and Monte-Carlo decoding pushes the latent uncertainty back
//! to every degree of freedom.

pub mod autoencoder;
pub mod config;
pub mod dataset;
pub mod datastore;
pub mod error;
pub mod fem;
pub mod gpr;
pub mod rng;
pub mod surrogate;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use autoencoder::{AutoencoderModel, AutoencoderSpec, TrainConfig};
pub use config::RunConfig;
pub use fem::{LoadKind, LoadSpec, MaterialParams, Mesh2D};
pub use gpr::{GPModel, GpConfig, LatentGPBundle};
pub use surrogate::{McConfig, PredictionField, SurrogateModel};
