use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::SurrogateModel;
use super::predict::PredictionField;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fem::max_nodal_displacement;

/// Per-DOF absolute errors of the framework, the autoencoder and the GP stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `|ũ_μ − u|`.
    pub e_f: Vec<f64>,
    /// `|u_r − u|`.
    pub e_r: Vec<f64>,
    /// `|ũ_μ − u_r|`.
    pub e_gp: Vec<f64>,
}

impl ErrorReport {
    pub fn mean_framework_error(&self) -> f64 {
        if self.e_f.is_empty() {
            return 0.0;
        }
        self.e_f.iter().sum::<f64>() / self.e_f.len() as f64
    }

    pub fn max_framework_error(&self) -> f64 {
        self.e_f.iter().copied().fold(0.0, f64::max)
    }
}

pub fn error_decompose(mean: &[f64], u_fem: &[f64], u_r: &[f64]) -> Result<ErrorReport> {
    if mean.len() != u_fem.len() || u_r.len() != u_fem.len() {
        return Err(Error::Shape(format!(
            "field lengths {} / {} / {} differ",
            mean.len(),
            u_fem.len(),
            u_r.len()
        )));
    }
    let abs_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>();
    let e_r = abs_diff(u_r, u_fem);
    let e_gp = abs_diff(mean, u_r);
    // In floating point |a − c| can exceed fl(|a − b| + |b − c|) by an ulp when b
    // lies between a and c; capping at the rounded sum keeps the bound exact.
    let e_f = mean
        .iter()
        .zip(u_fem)
        .enumerate()
        .map(|(i, (m, u))| (m - u).abs().min(e_r[i] + e_gp[i]))
        .collect();
    Ok(ErrorReport { e_f, e_r, e_gp })
}

/// Health of one prediction in latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentHealth {
    /// `|true − mean| ≤ 2σ`, per component.
    pub healthy: Vec<bool>,
    /// `|true − mean| / σ`; infinite where σ = 0 and the values differ.
    pub z_scores: Vec<f64>,
    pub correct: bool,
}

pub fn classify_latent_health(means: &[f64], vars: &[f64], truth: &[f64]) -> Result<LatentHealth> {
    if means.len() != vars.len() || truth.len() != means.len() {
        return Err(Error::Shape(format!(
            "latent lengths {} / {} / {} differ",
            means.len(),
            vars.len(),
            truth.len()
        )));
    }
    if let Some(v) = vars.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Contract(format!("latent variance {v} is negative")));
    }
    let mut healthy = Vec::with_capacity(means.len());
    let mut z_scores = Vec::with_capacity(means.len());
    for ((m, v), t) in means.iter().zip(vars).zip(truth) {
        let dev = (t - m).abs();
        let sd = v.sqrt();
        healthy.push(dev <= 2.0 * sd);
        z_scores.push(if dev == 0.0 { 0.0 } else { dev / sd });
    }
    let correct = healthy.iter().all(|h| *h);
    Ok(LatentHealth {
        healthy,
        z_scores,
        correct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub cases: Vec<LatentHealth>,
    pub healthy_percent: f64,
    pub correct_percent: f64,
}

impl HealthReport {
    pub fn from_cases(cases: Vec<LatentHealth>) -> Self {
        let total: usize = cases.iter().map(|c| c.healthy.len()).sum();
        let healthy: usize = cases.iter().map(|c| c.healthy.iter().filter(|h| **h).count()).sum();
        let correct = cases.iter().filter(|c| c.correct).count();
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        Self {
            healthy_percent: pct(healthy, total),
            correct_percent: pct(correct, cases.len()),
            cases,
        }
    }
}

/// Aggregate test-set errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub cases: usize,
    /// Per-case mean absolute DOF error `e_m`.
    pub case_errors: Vec<f64>,
    pub mean_error: f64,
    /// Corrected sample standard deviation of `e_m`.
    pub std_error: f64,
    pub max_error: f64,
    pub max_nodal_displacement: f64,
}

impl TestMetrics {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a ErrorReport>, max_nodal_displacement: f64) -> Self {
        let mut case_errors = Vec::new();
        let mut max_error = 0.0f64;
        for r in reports {
            case_errors.push(r.mean_framework_error());
            max_error = max_error.max(r.max_framework_error());
        }
        let m = case_errors.len();
        // Summed in sorted order so the aggregates do not depend on case order.
        let mut sorted = case_errors.clone();
        sorted.sort_by(f64::total_cmp);
        let mean_error = if m == 0 { 0.0 } else { sorted.iter().sum::<f64>() / m as f64 };
        let std_error = if m < 2 {
            0.0
        } else {
            let mut dev: Vec<f64> = sorted.iter().map(|e| (e - mean_error).powi(2)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (m - 1) as f64).sqrt()
        };
        Self {
            cases: m,
            case_errors,
            mean_error,
            std_error,
            max_error,
            max_nodal_displacement,
        }
    }
}

/// Everything computed for one test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEvaluation {
    pub force: Vec<f64>,
    pub prediction: PredictionField,
    pub true_latent: Vec<f64>,
    pub errors: ErrorReport,
    pub health: LatentHealth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: TestMetrics,
    pub health: HealthReport,
    pub cases: Vec<CaseEvaluation>,
}

pub fn evaluate_case(model: &SurrogateModel, force: &[f64], u: &DVector<f64>) -> Result<CaseEvaluation> {
    let prediction = model.predict_full(force)?;
    let true_latent = model.autoencoder.encode(u)?;
    let u_r = model.autoencoder.decode(&true_latent)?;
    let errors = error_decompose(&prediction.mean, u.as_slice(), u_r.as_slice())?;
    let health = classify_latent_health(&prediction.latent_means, &prediction.latent_vars, true_latent.as_slice())?;
    Ok(CaseEvaluation {
        force: force.to_vec(),
        prediction,
        true_latent: true_latent.as_slice().to_vec(),
        errors,
        health,
    })
}

/// Predicts every case (in parallel) and aggregates errors and latent health.
pub fn evaluate_testset(model: &SurrogateModel, test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Contract("test set is empty".into()));
    }
    if test.field_dim() != model.field_dim() {
        return Err(Error::Shape(format!(
            "test set has {} dofs, model expects {}",
            test.field_dim(),
            model.field_dim()
        )));
    }
    let cases: Vec<CaseEvaluation> = (0..test.len())
        .into_par_iter()
        .map(|i| evaluate_case(model, &test.force(i), &test.displacement(i)))
        .collect::<Result<_>>()?;
    let max_disp = (0..test.len())
        .map(|i| max_nodal_displacement(test.displacement(i).as_slice()))
        .fold(0.0, f64::max);
    let metrics = TestMetrics::from_reports(cases.iter().map(|c| &c.errors), max_disp);
    let health = HealthReport::from_cases(cases.iter().map(|c| c.health.clone()).collect());
    Ok(Evaluation { metrics, health, cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_decomposition() {
        let r = error_decompose(&[1.2], &[0.9], &[1.0]).unwrap();
        assert!((r.e_f[0] - 0.3).abs() < 1e-15);
        assert!((r.e_r[0] - 0.1).abs() < 1e-15);
        assert!((r.e_gp[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn perfect_gp_leaves_reconstruction_error() {
        let u = [0.3, -0.1, 2.0];
        let ur = [0.31, -0.12, 1.7];
        let r = error_decompose(&ur, &u, &ur).unwrap();
        assert!(r.e_gp.iter().all(|e| *e == 0.0));
        assert_eq!(r.e_f, r.e_r);
    }

    #[test]
    fn health_boundaries() {
        let h = classify_latent_health(&[0.0, 1.0], &[1.0, 4.0], &[0.0, 1.0]).unwrap();
        assert!(h.correct);
        let h = classify_latent_health(&[0.0, 0.0], &[1.0, 1.0], &[2.0, 0.0]).unwrap();
        assert_eq!(h.healthy, vec![true, true]);
        let h = classify_latent_health(&[0.0, 0.0, 0.0, 0.0], &[1.0; 4], &[2.01, 0.0, 0.0, 0.0]).unwrap();
        assert!(!h.correct);
        let r = HealthReport::from_cases(vec![h]);
        assert_eq!(r.healthy_percent, 75.0);
        assert_eq!(r.correct_percent, 0.0);
        assert!(matches!(classify_latent_health(&[0.0], &[-1e-9], &[0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn two_case_metrics() {
        let a = ErrorReport { e_f: vec![0.1, 0.1], e_r: vec![0.0; 2], e_gp: vec![0.1; 2] };
        let b = ErrorReport { e_f: vec![0.2, 0.4], e_r: vec![0.0; 2], e_gp: vec![0.0; 2] };
        let m = TestMetrics::from_reports([&a, &b], 1.0);
        assert!((m.mean_error - 0.2).abs() < 1e-15);
        assert!((m.std_error - 0.1f64.hypot(0.1)).abs() < 1e-15);
        assert_eq!(m.max_error, 0.4);
    }
}
