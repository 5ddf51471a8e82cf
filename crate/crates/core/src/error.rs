//! Error types, one enum per subsystem plus a crate-level wrapper.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("incompressible material: poisson ratio {0} must be < 0.5")]
    IncompressibleMaterial(f64),
    #[error("invalid material parameter: {0}")]
    InvalidMaterial(String),
    #[error("inverted element{} (J = {jacobian:e})", fmt_element(.element))]
    InvertedElement {
        element: Option<usize>,
        jacobian: f64,
    },
    #[error("newton iteration did not converge; last converged load factor {load_factor}")]
    NonConvergence { load_factor: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid load: {0}")]
    InvalidLoad(String),
    #[error("too many failed samples: {failures} failures for {requested} requested samples")]
    TooManyFailures { failures: usize, requested: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn fmt_element(element: &Option<usize>) -> String {
    element.map(|e| format!(" {e}")).unwrap_or_default()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutoencoderError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid autoencoder config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cholesky factorization failed even with jitter {jitter:e}")]
    CholeskyFailure { jitter: f64 },
    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailure(String),
    #[error("gp for latent component {index} failed: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<GpError>,
    },
    #[error("not enough training points: {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("checksum mismatch in {path}: manifest {expected}, computed {actual}")]
    ChecksumMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated blob {path}: expected {expected} bytes, found {found}")]
    TruncatedBlob {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid archive contents: {0}")]
    Invalid(String),
}

/// Pipeline stage, for labelling errors from `train_pipeline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Autoencoder,
    GaussianProcess,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Autoencoder => f.write_str("autoencoder"),
            Stage::GaussianProcess => f.write_str("gaussian-process"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Autoencoder(#[from] AutoencoderError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
