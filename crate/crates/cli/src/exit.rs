use fieldgp::error::{AutoencoderError, Error, FemError, GpError};

/// Stable failure classes and their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    NonConvergence,
    TrainingDivergence,
}

impl Category {
    pub fn code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::NonConvergence => 4,
            Category::TrainingDivergence => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Data => "data",
            Category::NonConvergence => "non_convergence",
            Category::TrainingDivergence => "training_divergence",
        }
    }

    pub fn of(e: &Error) -> Self {
        match e {
            Error::Config(_) => Category::Config,
            Error::Stage { source, .. } => Self::of(source),
            Error::Fem(f) => match f {
                FemError::NonConvergence { .. } | FemError::TooManyFailures { .. } | FemError::InvertedElement { .. } => {
                    Category::NonConvergence
                }
                FemError::IncompressibleMaterial(_) | FemError::InvalidMaterial(_) | FemError::InvalidMesh(_) => {
                    Category::Config
                }
                FemError::InvalidLoad(_) | FemError::Shape(_) => Category::Data,
            },
            Error::Autoencoder(a) => match a {
                AutoencoderError::Divergence { .. } => Category::TrainingDivergence,
                AutoencoderError::InvalidConfig(_) => Category::Config,
                AutoencoderError::Shape(_) => Category::Data,
            },
            Error::Gp(g) => gp_category(g),
            Error::Store(_) | Error::Shape(_) | Error::Contract(_) => Category::Data,
        }
    }
}

fn gp_category(g: &GpError) -> Category {
    match g {
        GpError::Component { source, .. } => gp_category(source),
        GpError::OptimizationFailure(_) | GpError::CholeskyFailure { .. } => Category::TrainingDivergence,
        GpError::Shape(_) | GpError::TooFewPoints(_) => Category::Data,
    }
}
