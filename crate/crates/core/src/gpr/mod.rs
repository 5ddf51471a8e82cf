//! Exact Gaussian-process regression with a Matérn-5/2 covariance.

pub mod bundle;
pub mod kernel;
pub mod model;
pub mod optimize;

pub use bundle::{fit_bundle, predict_bundle, LatentGPBundle};
pub use kernel::{
    covariance_matrix, cross_covariance, distance_matrix, matern52, median_pairwise_distance,
    Matern52Kernel, StationaryKernel,
};
pub use model::{
    lml_gradient, lml_with_gradient, log_marginal_likelihood, FitReport, GPModel, GpConfig,
    Hyperparams, Standardizer, NOISE_FLOOR,
};
pub use optimize::{minimize, BfgsOptions, Minimum, Objective};
