use serde::{Deserialize, Serialize};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// One bias-corrected Adam update at step `t` (1-based).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], t: u64, lr: f64, hp: &AdamParams) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        assert!(t >= 1, "adam step index is 1-based");
        let c1 = 1.0 - hp.beta1.powf(t as f64);
        let c2 = 1.0 - hp.beta2.powf(t as f64);
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(moments) {
            *m = flush(hp.beta1 * *m + (1.0 - hp.beta1) * g);
            *v = flush(hp.beta2 * *v + (1.0 - hp.beta2) * g * g);
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
}

/// Moments below this magnitude are stored as zero.
const MOMENT_FLOOR: f64 = 1e-200;

fn flush(x: f64) -> f64 {
    if x.abs() < MOMENT_FLOOR {
        0.0
    } else {
        x
    }
}

/// Learning rate at step `t` of `total`, linear from `start` (t = 1) to `end` (t = total).
pub fn linear_lr(t: u64, total: u64, start: f64, end: f64) -> f64 {
    if total <= 1 {
        return end;
    }
    let frac = (t.saturating_sub(1)) as f64 / (total - 1) as f64;
    let frac = frac.min(1.0);
    start * (1.0 - frac) + end * frac
}
