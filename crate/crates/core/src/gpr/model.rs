use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{
    covariance_from_distances, cross_covariance, distance_matrix, median_pairwise_distance,
    Matern52Kernel, StationaryKernel,
};
use super::optimize::{minimize, BfgsOptions};
use crate::error::GpError;
use crate::rng::keyed_rng;

pub const NOISE_FLOOR: f64 = 1e-8;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Kernel hyperparameters plus observation noise, in standardized target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub variance: f64,
    pub length_scale: f64,
    pub noise: f64,
}

impl Hyperparams {
    pub fn kernel(&self) -> Matern52Kernel {
        Matern52Kernel::new(self.variance, self.length_scale)
    }

    pub fn to_log(&self) -> [f64; 3] {
        [self.variance.ln(), self.length_scale.ln(), self.noise.ln()]
    }

    pub fn from_log(x: &[f64]) -> Self {
        Self {
            variance: x[0].exp(),
            length_scale: x[1].exp(),
            noise: x[2].exp(),
        }
    }
}

/// Affine target scaling `y = (raw − mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    /// Population mean and standard deviation.
    pub fn fit(raw: &[f64]) -> Self {
        let n = raw.len().max(1) as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn unstandardize(&self, y: f64) -> f64 {
        y * self.std + self.mean
    }
}

#[derive(Debug, Clone)]
struct Factorization {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Cholesky of `K + σ²I`, escalating diagonal jitter on failure.
fn factorize(dist: &DMatrix<f64>, y: &DVector<f64>, hp: &Hyperparams) -> Result<Factorization, GpError> {
    let kernel = hp.kernel();
    let base = covariance_from_distances(dist, &kernel, hp.noise);
    let mut jitter = 0.0;
    loop {
        let mut k = base.clone();
        if jitter > 0.0 {
            for i in 0..k.nrows() {
                k[(i, i)] += jitter;
            }
        }
        if let Some(chol) = k.cholesky() {
            let alpha = chol.solve(y);
            return Ok(Factorization { chol, alpha, jitter });
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * 1.000_001 {
            return Err(GpError::CholeskyFailure { jitter: JITTER_MAX });
        }
    }
}

/// Inverse of a lower-triangular matrix by recursive 2×2 blocking.
fn lower_triangular_inverse(l: DMatrixView<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    if n <= 48 {
        return l
            .into_owned()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("positive diagonal");
    }
    let h = n / 2;
    let a_inv = lower_triangular_inverse(l.view((0, 0), (h, h)));
    let c_inv = lower_triangular_inverse(l.view((h, h), (n - h, n - h)));
    let ba = l.view((h, 0), (n - h, h)) * &a_inv;
    let off = -(&c_inv * ba);
    let mut w = DMatrix::zeros(n, n);
    w.view_mut((0, 0), (h, h)).copy_from(&a_inv);
    w.view_mut((h, h), (n - h, n - h)).copy_from(&c_inv);
    w.view_mut((h, 0), (n - h, h)).copy_from(&off);
    w
}

/// `(L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹`.
fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let w = lower_triangular_inverse(l.as_view());
    w.transpose() * w
}

fn lml_from(fact: &Factorization, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let log_det_half: f64 = fact.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(&fact.alpha) - log_det_half - 0.5 * n * LN_2PI
}

/// Log marginal likelihood of standardized targets `y` at inputs `inputs`.
pub fn log_marginal_likelihood(inputs: &DMatrix<f64>, y: &DVector<f64>, hp: &Hyperparams) -> Result<f64, GpError> {
    check_training(inputs, y.len())?;
    let dist = distance_matrix(inputs);
    Ok(lml_from(&factorize(&dist, y, hp)?, y))
}

/// LML and its gradient with respect to `(log λ², log ψ, log σ²)`.
pub fn lml_with_gradient(
    dist: &DMatrix<f64>,
    y: &DVector<f64>,
    hp: &Hyperparams,
) -> Result<(f64, [f64; 3]), GpError> {
    let fact = factorize(dist, y, hp)?;
    let lml = lml_from(&fact, y);
    let kinv = cholesky_inverse(fact.chol.l_dirty());
    let kernel = hp.kernel();
    let n = y.len();
    let a = &fact.alpha;
    // ½ tr((ααᵀ − K⁻¹) ∂K), using symmetry of both factors.
    let (mut g_var, mut g_len, mut g_noise) = (0.0, 0.0, 0.0);
    for j in 0..n {
        for i in 0..j {
            let q = a[i] * a[j] - kinv[(i, j)];
            let (dv, dl) = kernel.grad_log_params(dist[(i, j)]);
            g_var += 2.0 * q * dv;
            g_len += 2.0 * q * dl;
        }
        let q = a[j] * a[j] - kinv[(j, j)];
        g_var += q * kernel.variance();
        g_noise += q;
    }
    Ok((lml, [0.5 * g_var, 0.5 * g_len, 0.5 * hp.noise * g_noise]))
}

pub fn lml_gradient(inputs: &DMatrix<f64>, y: &DVector<f64>, hp: &Hyperparams) -> Result<[f64; 3], GpError> {
    check_training(inputs, y.len())?;
    Ok(lml_with_gradient(&distance_matrix(inputs), y, hp)?.1)
}

fn check_training(inputs: &DMatrix<f64>, n_targets: usize) -> Result<(), GpError> {
    if inputs.nrows() != n_targets {
        return Err(GpError::Shape(format!(
            "{} inputs vs {} targets",
            inputs.nrows(),
            n_targets
        )));
    }
    if n_targets == 0 {
        return Err(GpError::TooFewPoints(0));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Perturbed restarts in addition to the default starting point.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            max_iters: 200,
        }
    }
}

/// Optimisation record for one fitted GP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub lml: f64,
    /// LML at each starting point (default first), `None` where infeasible.
    pub initial_lml: Vec<Option<f64>>,
    pub final_lml: Vec<Option<f64>>,
    pub best_start: usize,
}

#[derive(Debug, Clone)]
struct Posterior {
    fact: Factorization,
    lml: f64,
}

/// Exact single-output GP regressor; immutable after fitting.
#[derive(Debug, Clone)]
pub struct GPModel {
    hyper: Hyperparams,
    inputs: DMatrix<f64>,
    raw_targets: DVector<f64>,
    targets: DVector<f64>,
    standardizer: Standardizer,
    /// `None` for a constant-target model.
    posterior: Option<Posterior>,
}

impl GPModel {
    /// Rebuilds the cached factorization for fixed hyperparameters.
    ///
    /// A zero-variance target yields the flagged constant model.
    pub fn from_hyperparams(inputs: DMatrix<f64>, raw_targets: DVector<f64>, hyper: Hyperparams) -> Result<Self, GpError> {
        check_training(&inputs, raw_targets.len())?;
        let standardizer = Standardizer::fit(raw_targets.as_slice());
        if !(standardizer.std > 0.0) {
            return Ok(Self::constant(inputs, raw_targets, standardizer));
        }
        let targets = raw_targets.map(|v| standardizer.standardize(v));
        let fact = factorize(&distance_matrix(&inputs), &targets, &hyper)?;
        let lml = lml_from(&fact, &targets);
        Ok(Self {
            hyper,
            inputs,
            raw_targets,
            targets,
            standardizer,
            posterior: Some(Posterior { fact, lml }),
        })
    }

    fn constant(inputs: DMatrix<f64>, raw_targets: DVector<f64>, standardizer: Standardizer) -> Self {
        let n = raw_targets.len();
        Self {
            hyper: Hyperparams {
                variance: 1.0,
                length_scale: 1.0,
                noise: NOISE_FLOOR,
            },
            inputs,
            raw_targets,
            targets: DVector::zeros(n),
            standardizer,
            posterior: None,
        }
    }

    /// Standardizes targets and maximises the LML over multiple starts.
    pub fn fit(inputs: &DMatrix<f64>, raw_targets: &DVector<f64>, config: &GpConfig) -> Result<(Self, FitReport), GpError> {
        check_training(inputs, raw_targets.len())?;
        if inputs.nrows() < 2 {
            return Err(GpError::TooFewPoints(inputs.nrows()));
        }
        let standardizer = Standardizer::fit(raw_targets.as_slice());
        if !(standardizer.std > 0.0) {
            let model = Self::constant(inputs.clone(), raw_targets.clone(), standardizer);
            let report = FitReport {
                lml: f64::NAN,
                initial_lml: vec![],
                final_lml: vec![],
                best_start: 0,
            };
            return Ok((model, report));
        }
        let y = raw_targets.map(|v| standardizer.standardize(v));
        let dist = distance_matrix(inputs);
        let median = median_pairwise_distance(inputs);

        let x0 = Hyperparams {
            variance: 1.0,
            length_scale: median,
            noise: 0.1,
        }
        .to_log();
        let lower = [1e-6f64.ln(), (1e-3 * median).ln(), NOISE_FLOOR.ln()];
        let upper = [1e6f64.ln(), (1e3 * median).ln(), 10f64.ln()];
        let mut starts = vec![x0];
        for r in 0..config.restarts {
            let mut rng = keyed_rng(config.seed, &[r as u64]);
            starts.push([
                x0[0] + rng.random_range(-2.0..=2.0),
                x0[1] + rng.random_range(-2.0..=2.0),
                x0[2] + rng.random_range(-2.0..=2.0),
            ]);
        }

        let mut objective = |x: &[f64]| {
            let hp = Hyperparams::from_log(x);
            lml_with_gradient(&dist, &y, &hp)
                .ok()
                .filter(|(l, g)| l.is_finite() && g.iter().all(|v| v.is_finite()))
                .map(|(l, g)| (-l, g.iter().map(|v| -v).collect()))
        };
        let opts = BfgsOptions {
            max_iters: config.max_iters,
            ..BfgsOptions::default()
        };
        let mut initial_lml = Vec::with_capacity(starts.len());
        let mut final_lml = Vec::with_capacity(starts.len());
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for (si, start) in starts.iter().enumerate() {
            let mut s = *start;
            for i in 0..3 {
                s[i] = s[i].clamp(lower[i], upper[i]);
            }
            initial_lml.push(objective(&s).map(|(v, _)| -v));
            let result = minimize(&mut objective, &s, &lower, &upper, &opts);
            final_lml.push(result.as_ref().map(|m| -m.value));
            if let Some(m) = result {
                if best.as_ref().is_none_or(|(b, _, _)| -m.value > *b) {
                    best = Some((-m.value, m.x, si));
                }
            }
        }
        let (_, x, best_start) = best.ok_or_else(|| {
            GpError::OptimizationFailure("no feasible starting point".into())
        })?;
        let hyper = Hyperparams::from_log(&x);
        let model = Self::from_hyperparams(inputs.clone(), raw_targets.clone(), hyper)
            .map_err(|e| GpError::OptimizationFailure(e.to_string()))?;
        let report = FitReport {
            lml: model.lml().unwrap_or(f64::NAN),
            initial_lml,
            final_lml,
            best_start,
        };
        Ok((model, report))
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn raw_targets(&self) -> &DVector<f64> {
        &self.raw_targets
    }

    pub fn standardized_targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_constant(&self) -> bool {
        self.posterior.is_none()
    }

    pub fn lml(&self) -> Option<f64> {
        self.posterior.as_ref().map(|p| p.lml)
    }

    pub fn jitter(&self) -> f64 {
        self.posterior.as_ref().map_or(0.0, |p| p.fact.jitter)
    }

    pub fn alpha(&self) -> Option<&DVector<f64>> {
        self.posterior.as_ref().map(|p| &p.fact.alpha)
    }

    /// Lower Cholesky factor of `K + σ²I` (plus any jitter).
    pub fn cholesky_factor(&self) -> Option<DMatrix<f64>> {
        self.posterior.as_ref().map(|p| p.fact.chol.l())
    }

    /// Posterior mean and variance in standardized target units.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        if x.len() != self.input_dim() {
            return Err(GpError::Shape(format!(
                "test input has {} components, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let Some(post) = &self.posterior else {
            return Ok((0.0, NOISE_FLOOR));
        };
        let kernel = self.hyper.kernel();
        let kstar = cross_covariance(&self.inputs, x, &kernel);
        let mean = kstar.dot(&post.fact.alpha);
        let v = post.fact.chol.l_dirty().solve_lower_triangular(&kstar).expect("positive diagonal");
        let mut var = kernel.eval(0.0) - v.norm_squared();
        if var < 0.0 && var > -1e-12 {
            var = 0.0;
        }
        Ok((mean, var))
    }

    /// Posterior mean and variance in raw target units.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        if self.posterior.is_none() {
            if x.len() != self.input_dim() {
                return Err(GpError::Shape(format!(
                    "test input has {} components, model expects {}",
                    x.len(),
                    self.input_dim()
                )));
            }
            return Ok((self.standardizer.mean, NOISE_FLOOR));
        }
        let (m, v) = self.predict_standardized(x)?;
        let s = self.standardizer.std;
        Ok((self.standardizer.unstandardize(m), v * s * s))
    }
}
