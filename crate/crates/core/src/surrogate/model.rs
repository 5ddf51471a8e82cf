use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::predict::{monte_carlo_decode, PredictionField};
use crate::autoencoder::{encode_dataset, train, AutoencoderModel, AutoencoderSpec, LatentDataset, TrainConfig, TrainReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result, Stage};
use crate::gpr::{fit_bundle, predict_bundle, FitReport, GpConfig, LatentGPBundle};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub sample_count: usize,
    pub mc_seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            sample_count: 300,
            mc_seed: 0,
        }
    }
}

/// Trained autoencoder plus one GP per latent coordinate.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub autoencoder: AutoencoderModel,
    pub bundle: LatentGPBundle,
    pub sample_count: usize,
    pub mc_seed: u64,
}

impl SurrogateModel {
    pub fn new(autoencoder: AutoencoderModel, bundle: LatentGPBundle, mc: McConfig) -> Result<Self> {
        if bundle.latent_dim() != autoencoder.latent_dim() {
            return Err(Error::Contract(format!(
                "{} GPs for a latent space of dimension {}",
                bundle.latent_dim(),
                autoencoder.latent_dim()
            )));
        }
        if mc.sample_count < 2 {
            return Err(Error::Contract(format!("sample count {} must be at least 2", mc.sample_count)));
        }
        Ok(Self {
            autoencoder,
            bundle,
            sample_count: mc.sample_count,
            mc_seed: mc.mc_seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.bundle.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.autoencoder.latent_dim()
    }

    pub fn field_dim(&self) -> usize {
        self.autoencoder.input_dim()
    }

    /// Latent posterior means and variances at `f`.
    pub fn predict_latent(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if f.len() != self.input_dim() {
            return Err(Error::Shape(format!("load has {} components, model expects {}", f.len(), self.input_dim())));
        }
        let p = predict_bundle(&self.bundle, f)?;
        Ok(p.into_iter().unzip())
    }

    /// Monte-Carlo full-field prediction; the sample streams are keyed by the
    /// load itself, so a given load always sees the same draws.
    pub fn predict_full(&self, f: &[f64]) -> Result<PredictionField> {
        self.predict_full_case(f, input_key(f))
    }

    /// As [`predict_full`](Self::predict_full), with the sample streams keyed by `case`.
    pub fn predict_full_case(&self, f: &[f64], case: u64) -> Result<PredictionField> {
        let (m, v) = self.predict_latent(f)?;
        monte_carlo_decode(&self.autoencoder, &m, &v, self.sample_count, self.mc_seed, case)
    }

    /// `decode(encode(u))`.
    pub fn reconstruct(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.autoencoder.reconstruct(u)?)
    }
}

/// Stream key of a load vector; `-0.0` and `0.0` share a key.
pub fn input_key(f: &[f64]) -> u64 {
    let bits: Vec<u64> = f.iter().map(|&v| if v == 0.0 { 0 } else { v.to_bits() }).collect();
    derive_seed(f.len() as u64, &bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub autoencoder: Option<TrainReport>,
    pub gp: Vec<FitReport>,
}

fn staged<E: Into<Error>>(stage: Stage) -> impl FnOnce(E) -> Error {
    move |e| Error::Stage {
        stage,
        source: Box::new(e.into()),
    }
}

/// Second stage only: encode the training set and fit the GP bundle on it.
pub fn fit_latent_stage(
    autoencoder: AutoencoderModel,
    dataset: &Dataset,
    gp: &GpConfig,
    mc: McConfig,
) -> Result<(SurrogateModel, Vec<FitReport>, LatentDataset)> {
    let latent = encode_dataset(&autoencoder, dataset).map_err(staged(Stage::GaussianProcess))?;
    let (bundle, reports) = fit_bundle(&latent.forces, &latent.latents, gp).map_err(staged(Stage::GaussianProcess))?;
    let model = SurrogateModel::new(autoencoder, bundle, mc)?;
    Ok((model, reports, latent))
}

/// Two-stage training: autoencoder on displacements, then GPs on `(f, u^l)`.
pub fn train_pipeline(
    dataset: &Dataset,
    spec: AutoencoderSpec,
    ae: &TrainConfig,
    gp: &GpConfig,
    mc: McConfig,
) -> Result<(SurrogateModel, PipelineReport)> {
    if dataset.is_empty() {
        return Err(Error::Contract("training dataset is empty".into()));
    }
    let (autoencoder, ae_report) = train(&dataset.displacement_columns(), spec, ae).map_err(staged(Stage::Autoencoder))?;
    let (model, gp_reports, _) = fit_latent_stage(autoencoder, dataset, gp, mc)?;
    Ok((
        model,
        PipelineReport {
            autoencoder: Some(ae_report),
            gp: gp_reports,
        },
    ))
}
