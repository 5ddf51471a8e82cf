use serde::{Deserialize, Serialize};

use crate::error::FemError;

/// Isotropic Neo-Hookean material.
///
/// `mu` and `lambda` are always derived from `(youngs_modulus, poisson_ratio)`
/// through [`lame_from_engineering`]; construct with [`MaterialParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self, FemError> {
        if !(density >= 0.0 && density.is_finite()) {
            return Err(FemError::InvalidMaterial(format!(
                "density must be finite and non-negative, got {density}"
            )));
        }
        let (mu, lambda) = lame_from_engineering(youngs_modulus, poisson_ratio)?;
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            density,
            mu,
            lambda,
        })
    }

    /// The 2D beam material: E = 500 Pa, nu = 0.4, unit density.
    pub fn beam_default() -> Self {
        Self::new(500.0, 0.4, 1.0).expect("valid default material")
    }
}

/// Converts Young's modulus and Poisson's ratio to the Lamé pair `(mu, lambda)`.
pub fn lame_from_engineering(e: f64, nu: f64) -> Result<(f64, f64), FemError> {
    if nu >= 0.5 {
        return Err(FemError::IncompressibleMaterial(nu));
    }
    if !(e > 0.0 && e.is_finite()) {
        return Err(FemError::InvalidMaterial(format!(
            "young's modulus must be positive, got {e}"
        )));
    }
    if !(nu >= 0.0) {
        return Err(FemError::InvalidMaterial(format!(
            "poisson ratio must be in [0, 0.5), got {nu}"
        )));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((mu, lambda))
}
