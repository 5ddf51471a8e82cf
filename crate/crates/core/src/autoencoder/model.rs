use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{Activation, BlockCache, DenseCache, DenseLayer, LayerGrad, ResidualBlock};
use crate::error::AutoencoderError;

/// Architecture of the fully connected residual autoencoder.
///
/// Each encoder width `w` contributes one [`ResidualBlock`]; the decoder
/// mirrors the encoder widths in reverse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub latent_dim: usize,
    pub hidden_activation: Activation,
}

impl AutoencoderSpec {
    pub fn new(input_dim: usize, encoder_widths: Vec<usize>, latent_dim: usize) -> Self {
        Self {
            input_dim,
            encoder_widths,
            latent_dim,
            hidden_activation: Activation::Relu,
        }
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        self.encoder_widths.iter().rev().copied().collect()
    }

    pub fn validate(&self) -> Result<(), AutoencoderError> {
        if self.latent_dim == 0 || self.latent_dim >= self.input_dim {
            return Err(AutoencoderError::InvalidConfig(format!(
                "latent dim {} must be in [1, input dim {})",
                self.latent_dim, self.input_dim
            )));
        }
        if self.encoder_widths.contains(&0) {
            return Err(AutoencoderError::InvalidConfig("zero-width block".into()));
        }
        Ok(())
    }
}

/// Global affine map between physical displacements and network space:
/// `x = (u - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub scale: f64,
    pub offset: f64,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            offset: 0.0,
        }
    }

    /// Scale is the largest absolute entry of the training fields.
    pub fn fit(fields: &DMatrix<f64>) -> Self {
        let m = fields.amax();
        Self {
            scale: if m > 0.0 && m.is_finite() { m } else { 1.0 },
            offset: 0.0,
        }
    }

    pub fn normalize(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u.map(|v| (v - self.offset) / self.scale)
    }

    pub fn denormalize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x.map(|v| v * self.scale + self.offset)
    }
}

/// Trained encoder/decoder pair. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub spec: AutoencoderSpec,
    pub encoder_blocks: Vec<ResidualBlock>,
    pub latent_layer: DenseLayer,
    pub decoder_blocks: Vec<ResidualBlock>,
    pub output_layer: DenseLayer,
    pub normalizer: Normalizer,
}

/// Gradients in canonical layer order (see [`AutoencoderModel::layers`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .map(|g| g.weights.amax().max(g.bias.amax()))
            .fold(0.0, f64::max)
    }
}

struct Cache {
    encoder: Vec<BlockCache>,
    latent: DenseCache,
    decoder: Vec<BlockCache>,
    output: DenseCache,
}

impl AutoencoderModel {
    /// Glorot-initialised model with an identity normalizer.
    pub fn init<R: Rng>(spec: AutoencoderSpec, rng: &mut R) -> Result<Self, AutoencoderError> {
        spec.validate()?;
        let act = spec.hidden_activation;
        let mut prev = spec.input_dim;
        let mut encoder_blocks = Vec::with_capacity(spec.encoder_widths.len());
        for &w in &spec.encoder_widths {
            encoder_blocks.push(ResidualBlock::glorot(prev, w, act, rng));
            prev = w;
        }
        let latent_layer = DenseLayer::glorot(prev, spec.latent_dim, Activation::Linear, rng);
        prev = spec.latent_dim;
        let mut decoder_blocks = Vec::with_capacity(spec.encoder_widths.len());
        for w in spec.decoder_widths() {
            decoder_blocks.push(ResidualBlock::glorot(prev, w, act, rng));
            prev = w;
        }
        let output_layer = DenseLayer::glorot(prev, spec.input_dim, Activation::Linear, rng);
        Ok(Self {
            spec,
            encoder_blocks,
            latent_layer,
            decoder_blocks,
            output_layer,
            normalizer: Normalizer::identity(),
        })
    }

    /// Rebuilds a model from layers in canonical order, checking every shape.
    pub fn from_layers(
        spec: AutoencoderSpec,
        layers: Vec<DenseLayer>,
        normalizer: Normalizer,
    ) -> Result<Self, AutoencoderError> {
        spec.validate()?;
        let nb = spec.encoder_widths.len();
        if layers.len() != 4 * nb + 2 {
            return Err(AutoencoderError::Shape(format!(
                "expected {} layers, got {}",
                4 * nb + 2,
                layers.len()
            )));
        }
        let mut it = layers.into_iter();
        let take_block = |it: &mut std::vec::IntoIter<DenseLayer>| ResidualBlock {
            layer_a: it.next().expect("counted"),
            layer_b: it.next().expect("counted"),
        };
        let encoder_blocks = (0..nb).map(|_| take_block(&mut it)).collect();
        let latent_layer = it.next().expect("counted");
        let decoder_blocks = (0..nb).map(|_| take_block(&mut it)).collect();
        let output_layer = it.next().expect("counted");
        let model = Self {
            spec,
            encoder_blocks,
            latent_layer,
            decoder_blocks,
            output_layer,
            normalizer,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<(), AutoencoderError> {
        let mut expected = Vec::new();
        let mut prev = self.spec.input_dim;
        for &w in &self.spec.encoder_widths {
            expected.push((prev, w));
            expected.push((w, w));
            prev = w;
        }
        expected.push((prev, self.spec.latent_dim));
        prev = self.spec.latent_dim;
        for w in self.spec.decoder_widths() {
            expected.push((prev, w));
            expected.push((w, w));
            prev = w;
        }
        expected.push((prev, self.spec.input_dim));
        for (i, (layer, (inp, out))) in self.layers().into_iter().zip(expected).enumerate() {
            if layer.in_dim() != inp || layer.out_dim() != out || layer.bias.len() != out {
                return Err(AutoencoderError::Shape(format!(
                    "layer {i}: expected {out}x{inp}, got {}x{} (bias {})",
                    layer.out_dim(),
                    layer.in_dim(),
                    layer.bias.len()
                )));
            }
        }
        if self.output_layer.activation != Activation::Linear {
            return Err(AutoencoderError::InvalidConfig("output layer must be linear".into()));
        }
        Ok(())
    }

    /// Encoder blocks (a, b), latent layer, decoder blocks (a, b), output layer.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        let mut v = Vec::with_capacity(4 * self.encoder_blocks.len() + 2);
        for b in &self.encoder_blocks {
            v.push(&b.layer_a);
            v.push(&b.layer_b);
        }
        v.push(&self.latent_layer);
        for b in &self.decoder_blocks {
            v.push(&b.layer_a);
            v.push(&b.layer_b);
        }
        v.push(&self.output_layer);
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut v = Vec::with_capacity(4 * self.encoder_blocks.len() + 2);
        for b in &mut self.encoder_blocks {
            v.push(&mut b.layer_a);
            v.push(&mut b.layer_b);
        }
        v.push(&mut self.latent_layer);
        for b in &mut self.decoder_blocks {
            v.push(&mut b.layer_a);
            v.push(&mut b.layer_b);
        }
        v.push(&mut self.output_layer);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.parameter_count()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    fn check_rows(&self, m: &DMatrix<f64>, rows: usize, what: &str) -> Result<(), AutoencoderError> {
        if m.nrows() != rows {
            return Err(AutoencoderError::Shape(format!(
                "{what} has {} rows, expected {rows}",
                m.nrows()
            )));
        }
        Ok(())
    }

    /// Encoder on normalized columns.
    pub fn encode_normalized(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x.clone();
        for b in &self.encoder_blocks {
            h = b.apply(&h);
        }
        self.latent_layer.apply(&h)
    }

    /// Decoder to normalized columns.
    pub fn decode_normalized(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = z.clone();
        for b in &self.decoder_blocks {
            h = b.apply(&h);
        }
        self.output_layer.apply(&h)
    }

    /// Encodes physical displacement columns (`input_dim × n`).
    pub fn encode_batch(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>, AutoencoderError> {
        self.check_rows(u, self.spec.input_dim, "displacement batch")?;
        Ok(self.encode_normalized(&self.normalizer.normalize(u)))
    }

    /// Decodes latent columns (`latent_dim × n`) to physical displacements.
    pub fn decode_batch(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>, AutoencoderError> {
        self.check_rows(z, self.spec.latent_dim, "latent batch")?;
        Ok(self.normalizer.denormalize(&self.decode_normalized(z)))
    }

    pub fn encode(&self, u: &DVector<f64>) -> Result<DVector<f64>, AutoencoderError> {
        let z = self.encode_batch(&DMatrix::from_column_slice(u.len(), 1, u.as_slice()))?;
        Ok(z.column(0).into_owned())
    }

    pub fn decode(&self, z: &DVector<f64>) -> Result<DVector<f64>, AutoencoderError> {
        let u = self.decode_batch(&DMatrix::from_column_slice(z.len(), 1, z.as_slice()))?;
        Ok(u.column(0).into_owned())
    }

    /// `decode(encode(u))`.
    pub fn reconstruct(&self, u: &DVector<f64>) -> Result<DVector<f64>, AutoencoderError> {
        self.decode(&self.encode(u)?)
    }

    pub fn reconstruct_batch(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>, AutoencoderError> {
        self.decode_batch(&self.encode_batch(u)?)
    }

    fn forward(&self, x: DMatrix<f64>) -> (DMatrix<f64>, Cache) {
        let mut h = x;
        let mut encoder = Vec::with_capacity(self.encoder_blocks.len());
        for b in &self.encoder_blocks {
            let (out, c) = b.forward(h);
            encoder.push(c);
            h = out;
        }
        let (mut h, latent) = self.latent_layer.forward(h);
        let mut decoder = Vec::with_capacity(self.decoder_blocks.len());
        for b in &self.decoder_blocks {
            let (out, c) = b.forward(h);
            decoder.push(c);
            h = out;
        }
        let (out, output) = self.output_layer.forward(h);
        (
            out,
            Cache {
                encoder,
                latent,
                decoder,
                output,
            },
        )
    }

    /// Mean over samples of the squared reconstruction error, in normalized space.
    pub fn mse_loss(&self, batch: &DMatrix<f64>) -> Result<f64, AutoencoderError> {
        self.check_rows(batch, self.spec.input_dim, "batch")?;
        if batch.ncols() == 0 {
            return Err(AutoencoderError::Shape("empty batch".into()));
        }
        let x = self.normalizer.normalize(batch);
        let xhat = self.decode_normalized(&self.encode_normalized(&x));
        Ok((xhat - x).norm_squared() / batch.ncols() as f64)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn backprop(&self, batch: &DMatrix<f64>) -> Result<(f64, Gradients), AutoencoderError> {
        self.check_rows(batch, self.spec.input_dim, "batch")?;
        if batch.ncols() == 0 {
            return Err(AutoencoderError::Shape("empty batch".into()));
        }
        let x = self.normalizer.normalize(batch);
        Ok(self.backprop_normalized(&x))
    }

    pub(crate) fn backprop_normalized(&self, x: &DMatrix<f64>) -> (f64, Gradients) {
        let n = x.ncols() as f64;
        let (xhat, cache) = self.forward(x.clone());
        let residual = xhat - x;
        let loss = residual.norm_squared() / n;
        let mut grads: Vec<LayerGrad> = self.layers().into_iter().map(LayerGrad::zeros_like).collect();
        let nb = self.encoder_blocks.len();
        let mut g = residual * (2.0 / n);

        let (enc_grads, rest) = grads.split_at_mut(2 * nb);
        let (lat_grad, rest) = rest.split_at_mut(1);
        let (dec_grads, out_grad) = rest.split_at_mut(2 * nb);

        g = self.output_layer.backward(&cache.output, g, &mut out_grad[0]);
        for (i, b) in self.decoder_blocks.iter().enumerate().rev() {
            let (ga, gb) = dec_grads[2 * i..2 * i + 2].split_at_mut(1);
            g = b.backward(&cache.decoder[i], g, &mut ga[0], &mut gb[0]);
        }
        g = self.latent_layer.backward(&cache.latent, g, &mut lat_grad[0]);
        for (i, b) in self.encoder_blocks.iter().enumerate().rev() {
            let (ga, gb) = enc_grads[2 * i..2 * i + 2].split_at_mut(1);
            g = b.backward(&cache.encoder[i], g, &mut ga[0], &mut gb[0]);
        }
        (loss, Gradients { layers: grads })
    }
}
