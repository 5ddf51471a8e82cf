use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{linear_lr, AdamParams, AdamState};
use super::model::{AutoencoderModel, AutoencoderSpec, Normalizer};
use crate::dataset::Dataset;
use crate::error::AutoencoderError;
use crate::rng::keyed_rng;

/// Stream key for weight initialisation, apart from the per-epoch shuffles.
const INIT_STREAM: u64 = u64::MAX;
const SPLIT_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub adam: AdamParams,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 2000,
            lr_start: 1e-4,
            lr_end: 1e-6,
            adam: AdamParams::default(),
            seed: 0,
            validation_fraction: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AutoencoderError> {
        let bad = |m: &str| Err(AutoencoderError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return bad("need lr_start >= lr_end > 0");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch (normalized space).
    pub loss_history: Vec<f64>,
    /// Validation loss per epoch; empty without a validation split.
    pub validation_history: Vec<f64>,
    /// Loss over the full training split after the last update.
    pub final_train_loss: f64,
    /// `‖U_r − U‖_F / ‖U‖_F` over the training split, physical units.
    pub final_relative_error: f64,
    pub steps: u64,
    pub train_count: usize,
    pub validation_count: usize,
}

/// Aggregate relative reconstruction error `‖U_r − U‖_F / ‖U‖_F`.
pub fn relative_reconstruction_error(
    model: &AutoencoderModel,
    fields: &DMatrix<f64>,
) -> Result<f64, AutoencoderError> {
    let rec = model.reconstruct_batch(fields)?;
    let denom = fields.norm();
    let num = (rec - fields).norm();
    Ok(if denom > 0.0 { num / denom } else { num })
}

/// Trains on displacement columns (`input_dim × n`).
pub fn train(
    fields: &DMatrix<f64>,
    spec: AutoencoderSpec,
    config: &TrainConfig,
) -> Result<(AutoencoderModel, TrainReport), AutoencoderError> {
    config.validate()?;
    spec.validate()?;
    if fields.ncols() == 0 {
        return Err(AutoencoderError::Shape("empty training set".into()));
    }
    if fields.nrows() != spec.input_dim {
        return Err(AutoencoderError::Shape(format!(
            "fields have {} dofs, spec expects {}",
            fields.nrows(),
            spec.input_dim
        )));
    }

    let n = fields.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    let n_val = if n > 1 {
        ((config.validation_fraction * n as f64).round() as usize).min(n - 1)
    } else {
        0
    };
    if n_val > 0 {
        order.shuffle(&mut keyed_rng(config.seed, &[SPLIT_STREAM]));
    }
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let train_set = fields.select_columns(train_idx);
    let val_set = fields.select_columns(val_idx);

    let mut model = AutoencoderModel::init(spec, &mut keyed_rng(config.seed, &[INIT_STREAM]))?;
    model.normalizer = Normalizer::fit(&train_set);
    let x_train = model.normalizer.normalize(&train_set);
    let x_val = model.normalizer.normalize(&val_set);

    let mut adam: Vec<(AdamState, AdamState)> = model
        .layers()
        .iter()
        .map(|l| (AdamState::new(l.weights.len()), AdamState::new(l.bias.len())))
        .collect();

    let n_train = train_idx.len();
    let batches_per_epoch = n_train.div_ceil(config.batch_size);
    let total_steps = (batches_per_epoch * config.epochs) as u64;
    let mut t: u64 = 0;
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut validation_history = Vec::new();
    let mut perm: Vec<usize> = (0..n_train).collect();

    for epoch in 0..config.epochs {
        perm.sort_unstable();
        perm.shuffle(&mut keyed_rng(config.seed, &[epoch as u64]));
        let mut epoch_loss = 0.0;
        for chunk in perm.chunks(config.batch_size) {
            t += 1;
            let batch = x_train.select_columns(chunk);
            let (loss, grads) = model.backprop_normalized(&batch);
            if !loss.is_finite() {
                return Err(AutoencoderError::Divergence { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            let lr = linear_lr(t, total_steps, config.lr_start, config.lr_end);
            for ((layer, g), (sw, sb)) in model.layers_mut().into_iter().zip(&grads.layers).zip(&mut adam) {
                sw.step(layer.weights.as_mut_slice(), g.weights.as_slice(), t, lr, &config.adam);
                sb.step(layer.bias.as_mut_slice(), g.bias.as_slice(), t, lr, &config.adam);
            }
        }
        let epoch_loss = epoch_loss / n_train as f64;
        if !epoch_loss.is_finite() {
            return Err(AutoencoderError::Divergence { epoch, loss: epoch_loss });
        }
        loss_history.push(epoch_loss);
        if n_val > 0 {
            validation_history.push(normalized_loss(&model, &x_val));
        }
    }

    let final_train_loss = normalized_loss(&model, &x_train);
    if !final_train_loss.is_finite() {
        return Err(AutoencoderError::Divergence {
            epoch: config.epochs,
            loss: final_train_loss,
        });
    }
    let final_relative_error = relative_reconstruction_error(&model, &train_set)?;
    let report = TrainReport {
        loss_history,
        validation_history,
        final_train_loss,
        final_relative_error,
        steps: t,
        train_count: n_train,
        validation_count: n_val,
    };
    Ok((model, report))
}

fn normalized_loss(model: &AutoencoderModel, x: &DMatrix<f64>) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    let xhat = model.decode_normalized(&model.encode_normalized(x));
    (xhat - x).norm_squared() / x.ncols() as f64
}

/// Forces paired with encoded latent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDataset {
    /// `n × D`, copied unchanged from the source dataset.
    pub forces: DMatrix<f64>,
    /// `n × L`.
    pub latents: DMatrix<f64>,
}

impl LatentDataset {
    pub fn len(&self) -> usize {
        self.forces.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode_dataset(model: &AutoencoderModel, dataset: &Dataset) -> Result<LatentDataset, AutoencoderError> {
    if dataset.field_dim() != model.input_dim() {
        return Err(AutoencoderError::Shape(format!(
            "dataset has {} dofs, model expects {}",
            dataset.field_dim(),
            model.input_dim()
        )));
    }
    let latents = if dataset.is_empty() {
        DMatrix::zeros(0, model.latent_dim())
    } else {
        model.encode_batch(&dataset.displacement_columns())?.transpose()
    };
    Ok(LatentDataset {
        forces: dataset.forces.clone(),
        latents,
    })
}
