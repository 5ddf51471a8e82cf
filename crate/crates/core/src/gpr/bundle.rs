use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::model::{FitReport, GPModel, GpConfig};
use crate::error::GpError;
use crate::rng::derive_seed;

/// One independent GP per latent component, all sharing the same inputs.
#[derive(Debug, Clone)]
pub struct LatentGPBundle {
    pub gps: Vec<GPModel>,
}

impl LatentGPBundle {
    pub fn new(gps: Vec<GPModel>) -> Result<Self, GpError> {
        if let Some(first) = gps.first() {
            if gps.iter().any(|g| g.inputs() != first.inputs()) {
                return Err(GpError::Shape("bundle members have different training inputs".into()));
            }
        }
        Ok(Self { gps })
    }

    pub fn latent_dim(&self) -> usize {
        self.gps.len()
    }

    pub fn input_dim(&self) -> usize {
        self.gps.first().map_or(0, |g| g.input_dim())
    }

    pub fn train_inputs(&self) -> Option<&DMatrix<f64>> {
        self.gps.first().map(|g| g.inputs())
    }
}

/// Fits each column of `latents` against `inputs`, in parallel.
///
/// Component `l` uses seed `derive_seed(config.seed, [l])`, so results do not
/// depend on the thread count.
pub fn fit_bundle(
    inputs: &DMatrix<f64>,
    latents: &DMatrix<f64>,
    config: &GpConfig,
) -> Result<(LatentGPBundle, Vec<FitReport>), GpError> {
    if inputs.nrows() != latents.nrows() {
        return Err(GpError::Shape(format!(
            "{} inputs vs {} latent rows",
            inputs.nrows(),
            latents.nrows()
        )));
    }
    let fits: Vec<_> = (0..latents.ncols())
        .into_par_iter()
        .map(|l| {
            let cfg = GpConfig {
                seed: derive_seed(config.seed, &[l as u64]),
                ..*config
            };
            let y: DVector<f64> = latents.column(l).into_owned();
            GPModel::fit(inputs, &y, &cfg).map_err(|e| GpError::Component {
                index: l,
                source: Box::new(e),
            })
        })
        .collect();
    let mut gps = Vec::with_capacity(fits.len());
    let mut reports = Vec::with_capacity(fits.len());
    for fit in fits {
        let (g, r) = fit?;
        gps.push(g);
        reports.push(r);
    }
    Ok((LatentGPBundle { gps }, reports))
}

/// `(mean, variance)` per latent component, in component order.
pub fn predict_bundle(bundle: &LatentGPBundle, x: &[f64]) -> Result<Vec<(f64, f64)>, GpError> {
    bundle
        .gps
        .iter()
        .enumerate()
        .map(|(l, g)| {
            g.predict(x).map_err(|e| GpError::Component {
                index: l,
                source: Box::new(e),
            })
        })
        .collect()
}
