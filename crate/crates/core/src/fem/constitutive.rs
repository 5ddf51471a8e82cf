//! Plane-strain compressible Neo-Hookean law.
//!
//! The out-of-plane stretch is fixed at one, so the in-plane 2x2 gradient
//! carries everything: `J = det F` and `Ic = tr(FᵀF) + 1`.

use super::MaterialParams;
use crate::error::FemError;

/// 2x2 tensor, indexed `[row][col]`.
pub type Tensor2 = [[f64; 2]; 2];

/// Fourth-order tangent `A[i][J][k][L] = dP_iJ / dF_kL`.
pub type Tangent4 = [[[[f64; 2]; 2]; 2]; 2];

pub const IDENTITY: Tensor2 = [[1.0, 0.0], [0.0, 1.0]];

/// Kinematic state at a quadrature point.
///
/// `h = F − I` is kept alongside `F` so that near-identity states evaluate
/// stresses without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub f: Tensor2,
    pub h: Tensor2,
    pub j: f64,
    /// `J − 1`, accurate for small `h`.
    pub j_minus_one: f64,
    pub ic: f64,
}

impl DeformationState {
    pub fn new(f: Tensor2) -> Self {
        let h = [[f[0][0] - 1.0, f[0][1]], [f[1][0], f[1][1] - 1.0]];
        Self::build(f, h)
    }

    /// State from the displacement gradient `∇u = F − I`.
    pub fn from_displacement_gradient(h: Tensor2) -> Self {
        let f = [[1.0 + h[0][0], h[0][1]], [h[1][0], 1.0 + h[1][1]]];
        Self::build(f, h)
    }

    fn build(f: Tensor2, h: Tensor2) -> Self {
        let j_minus_one = h[0][0] + h[1][1] + h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let ic = f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1] + 1.0;
        Self {
            f,
            h,
            j: 1.0 + j_minus_one,
            j_minus_one,
            ic,
        }
    }

    pub fn identity() -> Self {
        Self::new(IDENTITY)
    }

    /// `Ic − 3`, accurate for small `h`.
    fn ic_minus_three(&self) -> f64 {
        let h = &self.h;
        2.0 * (h[0][0] + h[1][1]) + h[0][0] * h[0][0] + h[0][1] * h[0][1] + h[1][0] * h[1][0] + h[1][1] * h[1][1]
    }

    /// `J² − 1`.
    fn j2_minus_one(&self) -> f64 {
        self.j_minus_one * (2.0 + self.j_minus_one)
    }

    fn check(&self) -> Result<(), FemError> {
        if self.j > 0.0 && self.j.is_finite() {
            Ok(())
        } else {
            Err(FemError::InvertedElement {
                element: None,
                jacobian: self.j,
            })
        }
    }

    /// F⁻ᵀ; requires J > 0.
    fn inverse_transpose(&self) -> Tensor2 {
        let f = &self.f;
        let inv_j = 1.0 / self.j;
        [
            [f[1][1] * inv_j, -f[1][0] * inv_j],
            [-f[0][1] * inv_j, f[0][0] * inv_j],
        ]
    }
}

/// Stored energy `W = μ/2 (Ic − 3 − 2 ln J) + λ/4 (J² − 1 − 2 ln J)`.
pub fn strain_energy(state: &DeformationState, mat: &MaterialParams) -> Result<f64, FemError> {
    state.check()?;
    let ln_j = state.j_minus_one.ln_1p();
    Ok(0.5 * mat.mu * (state.ic_minus_three() - 2.0 * ln_j) + 0.25 * mat.lambda * (state.j2_minus_one() - 2.0 * ln_j))
}

/// First Piola-Kirchhoff stress `P = μ (F − F⁻ᵀ) + λ/2 (J² − 1) F⁻ᵀ`.
pub fn piola_stress(state: &DeformationState, mat: &MaterialParams) -> Result<Tensor2, FemError> {
    state.check()?;
    let fit = state.inverse_transpose();
    let c = 0.5 * mat.lambda * state.j2_minus_one();
    // J F − cof F, expanded in h.
    let (h, d, j) = (&state.h, state.j_minus_one, state.j);
    let dev = [
        [h[0][0] - h[1][1] + d * (1.0 + h[0][0]), j * h[0][1] + h[1][0]],
        [j * h[1][0] + h[0][1], h[1][1] - h[0][0] + d * (1.0 + h[1][1])],
    ];
    let mut p = [[0.0; 2]; 2];
    for i in 0..2 {
        for jj in 0..2 {
            p[i][jj] = mat.mu * dev[i][jj] / j + c * fit[i][jj];
        }
    }
    Ok(p)
}

/// Consistent material tangent `dP/dF`.
pub fn material_tangent(
    state: &DeformationState,
    mat: &MaterialParams,
) -> Result<Tangent4, FemError> {
    state.check()?;
    let fit = state.inverse_transpose();
    let cross = mat.mu - 0.5 * mat.lambda * state.j2_minus_one();
    let vol = mat.lambda * state.j * state.j;
    let mut a = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for jj in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let identity = if i == k && jj == l { mat.mu } else { 0.0 };
                    a[i][jj][k][l] =
                        identity + cross * fit[i][l] * fit[k][jj] + vol * fit[i][jj] * fit[k][l];
                }
            }
        }
    }
    Ok(a)
}
