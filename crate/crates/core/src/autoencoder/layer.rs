use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Linear => z.clone(),
        }
    }

    /// Multiplies `grad` in place by the derivative at pre-activation `z`.
    /// The ReLU derivative at exactly zero is taken as zero.
    fn backprop(self, z: &DMatrix<f64>, grad: &mut DMatrix<f64>) {
        if let Activation::Relu = self {
            grad.zip_apply(z, |g, zv| {
                if zv <= 0.0 {
                    *g = 0.0;
                }
            });
        }
    }
}

/// Fully connected layer `act(W x + b)` on column-batched inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out_dim × in_dim`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

/// Values cached by [`DenseLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct DenseCache {
    pub input: DMatrix<f64>,
    pub pre: DMatrix<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: DMatrix::zeros(out_dim, in_dim),
            bias: DVector::zeros(out_dim),
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        // Filled row by row so the draw order matches the row-major blob layout.
        let mut weights = DMatrix::zeros(out_dim, in_dim);
        for r in 0..out_dim {
            for c in 0..in_dim {
                weights[(r, c)] = rng.random_range(-limit..limit);
            }
        }
        Self {
            weights,
            bias: DVector::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn pre_activation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.activation.apply(&self.pre_activation(x))
    }

    pub(crate) fn forward(&self, x: DMatrix<f64>) -> (DMatrix<f64>, DenseCache) {
        let pre = self.pre_activation(&x);
        let out = self.activation.apply(&pre);
        (out, DenseCache { input: x, pre })
    }

    /// Returns the input gradient and accumulates parameter gradients.
    pub(crate) fn backward(
        &self,
        cache: &DenseCache,
        mut grad_out: DMatrix<f64>,
        grad: &mut LayerGrad,
    ) -> DMatrix<f64> {
        self.activation.backprop(&cache.pre, &mut grad_out);
        grad.weights.gemm(1.0, &grad_out, &cache.input.transpose(), 1.0);
        for col in grad_out.column_iter() {
            grad.bias += col;
        }
        self.weights.transpose() * grad_out
    }
}

/// Two equal-width dense layers with the first layer's output added to the second's.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub layer_a: DenseLayer,
    pub layer_b: DenseLayer,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockCache {
    a: DenseCache,
    b: DenseCache,
}

impl ResidualBlock {
    pub fn glorot<R: Rng>(in_dim: usize, width: usize, activation: Activation, rng: &mut R) -> Self {
        let layer_a = DenseLayer::glorot(in_dim, width, activation, rng);
        let layer_b = DenseLayer::glorot(width, width, activation, rng);
        Self { layer_a, layer_b }
    }

    pub fn width(&self) -> usize {
        self.layer_a.out_dim()
    }

    pub fn is_consistent(&self) -> bool {
        self.layer_a.out_dim() == self.layer_b.out_dim() && self.layer_b.in_dim() == self.layer_b.out_dim()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let h = self.layer_a.apply(x);
        let y = self.layer_b.apply(&h);
        h + y
    }

    pub(crate) fn forward(&self, x: DMatrix<f64>) -> (DMatrix<f64>, BlockCache) {
        let (h, a) = self.layer_a.forward(x);
        let (y, b) = self.layer_b.forward(h.clone());
        (h + y, BlockCache { a, b })
    }

    pub(crate) fn backward(
        &self,
        cache: &BlockCache,
        grad_out: DMatrix<f64>,
        grad_a: &mut LayerGrad,
        grad_b: &mut LayerGrad,
    ) -> DMatrix<f64> {
        let through_b = self.layer_b.backward(&cache.b, grad_out.clone(), grad_b);
        self.layer_a.backward(&cache.a, grad_out + through_b, grad_a)
    }
}

/// Gradient of one [`DenseLayer`], same shapes as its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: DMatrix::zeros(layer.out_dim(), layer.in_dim()),
            bias: DVector::zeros(layer.out_dim()),
        }
    }
}
