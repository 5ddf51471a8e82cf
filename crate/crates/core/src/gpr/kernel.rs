use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Isotropic stationary covariance `k(r)` with hyperparameters handled in log space.
///
/// Only Matérn-5/2 is provided; other covariance functions plug in by
/// implementing this trait.
pub trait StationaryKernel {
    fn eval(&self, r: f64) -> f64;
    /// `(dk/d log variance, dk/d log length_scale)` at distance `r`.
    fn grad_log_params(&self, r: f64) -> (f64, f64);
    fn variance(&self) -> f64;
}

/// `k(r) = λ² (1 + √5 r/ψ + 5r²/(3ψ²)) exp(−√5 r/ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matern52Kernel {
    pub variance: f64,
    pub length_scale: f64,
}

impl Matern52Kernel {
    pub fn new(variance: f64, length_scale: f64) -> Self {
        Self {
            variance,
            length_scale,
        }
    }
}

impl StationaryKernel for Matern52Kernel {
    fn eval(&self, r: f64) -> f64 {
        let a = SQRT5 * r / self.length_scale;
        self.variance * (1.0 + a + a * a / 3.0) * (-a).exp()
    }

    fn grad_log_params(&self, r: f64) -> (f64, f64) {
        let a = SQRT5 * r / self.length_scale;
        let e = (-a).exp();
        let k = self.variance * (1.0 + a + a * a / 3.0) * e;
        let dlog_len = self.variance * a * a * (1.0 + a) / 3.0 * e;
        (k, dlog_len)
    }

    fn variance(&self) -> f64 {
        self.variance
    }
}

/// Free-function form of the Matérn-5/2 covariance.
pub fn matern52(r: f64, kernel: &Matern52Kernel) -> f64 {
    kernel.eval(r)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Pairwise distances between the rows of `inputs`.
pub fn distance_matrix(inputs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = inputs.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(inputs, i)).collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let r = distance(&rows[i], &rows[j]);
            d[(i, j)] = r;
            d[(j, i)] = r;
        }
    }
    d
}

/// Gram matrix with `jitter` added to the diagonal.
pub fn covariance_matrix<K: StationaryKernel>(inputs: &DMatrix<f64>, kernel: &K, jitter: f64) -> DMatrix<f64> {
    covariance_from_distances(&distance_matrix(inputs), kernel, jitter)
}

pub fn covariance_from_distances<K: StationaryKernel>(dist: &DMatrix<f64>, kernel: &K, jitter: f64) -> DMatrix<f64> {
    let n = dist.nrows();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = kernel.eval(dist[(i, j)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(j, j)] = kernel.variance() + jitter;
    }
    k
}

/// Cross-covariances between one test input and every training row.
pub fn cross_covariance<K: StationaryKernel>(inputs: &DMatrix<f64>, x: &[f64], kernel: &K) -> DVector<f64> {
    DVector::from_fn(inputs.nrows(), |i, _| {
        let r = inputs.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        kernel.eval(r)
    })
}

/// Median of all pairwise row distances; 1 when undefined or zero.
pub fn median_pairwise_distance(inputs: &DMatrix<f64>) -> f64 {
    let n = inputs.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(inputs, i)).collect();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            d.push(distance(&rows[i], &rows[j]));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med > 0.0 && med.is_finite() {
        med
    } else {
        1.0
    }
}
