use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Anything that maps latent columns to full-field columns.
pub trait FieldDecoder {
    fn latent_dim(&self) -> usize;
    fn field_dim(&self) -> usize;
    /// `latent_dim × n` to `field_dim × n`.
    fn decode_columns(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

impl FieldDecoder for AutoencoderModel {
    fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    fn field_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn decode_columns(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.decode_batch(z)?)
    }
}

/// `u = A z + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDecoder {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineDecoder {
    pub fn identity(dim: usize) -> Self {
        Self {
            a: DMatrix::identity(dim, dim),
            c: DVector::zeros(dim),
        }
    }

    /// Analytic per-DOF mean and std of `A z + c` under independent latents.
    pub fn pushforward(&self, means: &[f64], vars: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let mean = &self.a * DVector::from_column_slice(means) + &self.c;
        let std = DVector::from_fn(self.a.nrows(), |i, _| {
            (0..self.a.ncols()).map(|l| self.a[(i, l)].powi(2) * vars[l]).sum::<f64>().sqrt()
        });
        (mean, std)
    }
}

impl FieldDecoder for AffineDecoder {
    fn latent_dim(&self) -> usize {
        self.a.ncols()
    }

    fn field_dim(&self) -> usize {
        self.a.nrows()
    }

    fn decode_columns(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.nrows() != self.a.ncols() {
            return Err(Error::Shape(format!("latent batch has {} rows, expected {}", z.nrows(), self.a.ncols())));
        }
        let mut u = &self.a * z;
        for mut col in u.column_iter_mut() {
            col += &self.c;
        }
        Ok(u)
    }
}

/// Probabilistic full-field prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionField {
    pub mean: Vec<f64>,
    /// Corrected sample standard deviation per DOF.
    pub std: Vec<f64>,
    /// `std²`.
    pub variance: Vec<f64>,
    pub latent_means: Vec<f64>,
    pub latent_vars: Vec<f64>,
}

/// Latent draws for one prediction, `L × S`.
///
/// Sample `s` of case `case` uses its own stream keyed by `(seed, case, s)`,
/// from which the `L` standard normals are taken in component order.
pub fn latent_samples(means: &[f64], vars: &[f64], samples: usize, seed: u64, case: u64) -> DMatrix<f64> {
    let l = means.len();
    let mut z = DMatrix::zeros(l, samples);
    for s in 0..samples {
        let mut rng = keyed_rng(seed, &[case, s as u64]);
        for k in 0..l {
            let e: f64 = rng.sample(StandardNormal);
            z[(k, s)] = means[k] + vars[k].sqrt() * e;
        }
    }
    z
}

/// Per-row sample mean and corrected standard deviation.
///
/// Deviations are taken from the first column so that identical samples give
/// that value back and a zero spread exactly.
pub fn column_statistics(samples: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let s = samples.ncols();
    let mut mean = Vec::with_capacity(samples.nrows());
    let mut std = Vec::with_capacity(samples.nrows());
    for row in samples.row_iter() {
        let x0 = row[0];
        let (mut sum, mut sq) = (0.0, 0.0);
        for &x in row.iter() {
            let d = x - x0;
            sum += d;
            sq += d * d;
        }
        mean.push(x0 + sum / s as f64);
        let var = if s > 1 { ((sq - sum * sum / s as f64) / (s - 1) as f64).max(0.0) } else { 0.0 };
        std.push(var.sqrt());
    }
    (mean, std)
}

/// Monte-Carlo pushforward of independent Gaussian latents through `decoder`.
pub fn monte_carlo_decode<D: FieldDecoder + ?Sized>(
    decoder: &D,
    means: &[f64],
    vars: &[f64],
    samples: usize,
    seed: u64,
    case: u64,
) -> Result<PredictionField> {
    let l = decoder.latent_dim();
    if means.len() != l || vars.len() != l {
        return Err(Error::Shape(format!(
            "latent moments have lengths {}/{}, decoder expects {l}",
            means.len(),
            vars.len()
        )));
    }
    if samples < 2 {
        return Err(Error::Contract(format!("sample count {samples} must be at least 2")));
    }
    if let Some(v) = vars.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Contract(format!("latent variance {v} is negative")));
    }
    let z = latent_samples(means, vars, samples, seed, case);
    let u = decoder.decode_columns(&z)?;
    let (mean, std) = column_statistics(&u);
    let variance = std.iter().map(|s| s * s).collect();
    Ok(PredictionField {
        mean,
        std,
        variance,
        latent_means: means.to_vec(),
        latent_vars: vars.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_is_degenerate() {
        let dec = AffineDecoder::identity(3);
        let m = [0.1, -2.7, 1e-3];
        let p = monte_carlo_decode(&dec, &m, &[0.0; 3], 300, 9, 0).unwrap();
        assert_eq!(p.mean, m.to_vec());
        assert_eq!(p.std, vec![0.0; 3]);
    }

    #[test]
    fn single_latent_mean_within_standard_error_bound() {
        let dec = AffineDecoder::identity(1);
        let (m, s) = (0.4, 0.7);
        for seed in 0..20 {
            let p = monte_carlo_decode(&dec, &[m], &[s * s], 300, seed, 0).unwrap();
            assert!((p.mean[0] - m).abs() <= 5.0 * s / 300f64.sqrt());
        }
    }

    #[test]
    fn rejects_bad_moments() {
        let dec = AffineDecoder::identity(2);
        assert!(matches!(monte_carlo_decode(&dec, &[0.0], &[1.0], 10, 0, 0), Err(Error::Shape(_))));
        assert!(matches!(monte_carlo_decode(&dec, &[0.0; 2], &[1.0, -1e-3], 10, 0, 0), Err(Error::Contract(_))));
        assert!(matches!(monte_carlo_decode(&dec, &[0.0; 2], &[1.0; 2], 1, 0, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn seeded_draws_repeat() {
        let dec = AffineDecoder::identity(2);
        let a = monte_carlo_decode(&dec, &[0.0, 1.0], &[1.0, 2.0], 50, 3, 7).unwrap();
        let b = monte_carlo_decode(&dec, &[0.0, 1.0], &[1.0, 2.0], 50, 3, 7).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_decode(&dec, &[0.0, 1.0], &[1.0, 2.0], 50, 3, 8).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
