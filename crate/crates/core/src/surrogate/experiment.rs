use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{train_pipeline, McConfig, PipelineReport, SurrogateModel};
use crate::autoencoder::{AutoencoderSpec, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fem::{FemProblem, LoadKind, LoadSpec};
use crate::gpr::GpConfig;
use crate::rng::keyed_rng;

/// Controls for the masked-training-data study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissingRegionSpec {
    /// Mask radius as a fraction of the force half-range.
    pub mask_ratio: f64,
    /// Sweep half-length as a multiple of the force half-range.
    pub sweep_extension: f64,
    pub sweep_points: usize,
    /// Arc position of the loaded node for point loads; `None` is the far end of the edge.
    pub sweep_arc: Option<f64>,
    pub scatter_points: usize,
    pub scatter_seed: u64,
    /// Solve the FEM problem at sweep points to report true latent errors.
    pub with_truth: bool,
}

impl Default for MissingRegionSpec {
    fn default() -> Self {
        Self {
            mask_ratio: 0.4,
            sweep_extension: 1.2,
            sweep_points: 61,
            sweep_arc: None,
            scatter_points: 200,
            scatter_seed: 7,
            with_truth: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Masked,
    Supported,
    Extrapolated,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Masked => "masked",
            Region::Supported => "supported",
            Region::Extrapolated => "extrapolated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub input: Vec<f64>,
    pub region: Region,
    pub latent_mean: Vec<f64>,
    pub latent_std: Vec<f64>,
    /// Latent std divided by the standardizer scale of each GP.
    pub latent_std_standardized: Vec<f64>,
    /// `|encoded FEM latent − mean|`, when the FEM solve was requested and converged.
    pub latent_abs_error: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    /// Mean standardized latent std over masked scatter points.
    pub masked_mean_std: f64,
    pub supported_mean_std: f64,
    pub masked_to_supported: f64,
    /// Per latent: smaller std of the two sweep ends.
    pub sweep_end_std: Vec<f64>,
    /// Per latent: largest std over supported sweep points.
    pub sweep_supported_max_std: Vec<f64>,
    pub ends_dominate: bool,
}

#[derive(Debug, Clone)]
pub struct MissingRegionResult {
    pub mask_radius: f64,
    pub train_count: usize,
    pub removed: usize,
    pub model: SurrogateModel,
    pub report: PipelineReport,
    pub sweep: Vec<ProbePoint>,
    pub scatter: Vec<ProbePoint>,
    pub summary: RegionSummary,
}

/// Drops cases whose in-plane force magnitude `‖(f_0, f_1)‖` is below `radius`.
pub fn mask_dataset(dataset: &Dataset, radius: f64) -> Dataset {
    let keep: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.forces[(i, 0)].hypot(dataset.forces[(i, 1)]) >= radius)
        .collect();
    dataset.subset(&keep)
}

pub fn classify_region(fx: f64, fy: f64, radius: f64, half_range: [f64; 2]) -> Region {
    if fx.abs() > half_range[0] || fy.abs() > half_range[1] {
        Region::Extrapolated
    } else if fx.hypot(fy) < radius {
        Region::Masked
    } else {
        Region::Supported
    }
}

/// Input vectors of the `f_y` sweep at `f_x = 0`.
pub fn sweep_inputs(kind: LoadKind, half_range: f64, spec: &MissingRegionSpec, arc: f64) -> Vec<Vec<f64>> {
    let n = spec.sweep_points.max(2);
    let h = spec.sweep_extension * half_range;
    (0..n)
        .map(|k| {
            let fy = -h + 2.0 * h * k as f64 / (n - 1) as f64;
            match kind {
                LoadKind::PointLoad => vec![0.0, fy, arc],
                LoadKind::BodyForce => vec![0.0, fy],
            }
        })
        .collect()
}

/// Uniform scatter over the training force box.
pub fn scatter_inputs(kind: LoadKind, half_range: [f64; 2], spec: &MissingRegionSpec, arc: f64) -> Vec<Vec<f64>> {
    (0..spec.scatter_points)
        .map(|k| {
            let mut rng = keyed_rng(spec.scatter_seed, &[k as u64]);
            let fx = rng.random_range(-half_range[0]..=half_range[0]);
            let fy = rng.random_range(-half_range[1]..=half_range[1]);
            match kind {
                LoadKind::PointLoad => vec![fx, fy, arc],
                LoadKind::BodyForce => vec![fx, fy],
            }
        })
        .collect()
}

pub fn probe(
    model: &SurrogateModel,
    input: &[f64],
    radius: f64,
    half_range: [f64; 2],
    truth: Option<&[f64]>,
) -> Result<ProbePoint> {
    let (mean, var) = model.predict_latent(input)?;
    let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let latent_std_standardized = std
        .iter()
        .zip(&model.bundle.gps)
        .map(|(s, g)| {
            let scale = g.standardizer().std;
            if scale > 0.0 { s / scale } else { 0.0 }
        })
        .collect();
    let latent_abs_error = truth.map(|t| t.iter().zip(&mean).map(|(a, b)| (a - b).abs()).collect());
    Ok(ProbePoint {
        region: classify_region(input[0], input[1], radius, half_range),
        input: input.to_vec(),
        latent_mean: mean,
        latent_std: std,
        latent_std_standardized,
        latent_abs_error,
    })
}

fn mean_std(points: &[ProbePoint], region: Region) -> f64 {
    let vals: Vec<f64> = points
        .iter()
        .filter(|p| p.region == region)
        .flat_map(|p| p.latent_std_standardized.iter().copied())
        .collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn summarize(sweep: &[ProbePoint], scatter: &[ProbePoint]) -> RegionSummary {
    let masked = mean_std(scatter, Region::Masked);
    let supported = mean_std(scatter, Region::Supported);
    let l = sweep.first().map_or(0, |p| p.latent_std.len());
    let (first, last) = (sweep.first(), sweep.last());
    let sweep_end_std: Vec<f64> = (0..l)
        .map(|k| match (first, last) {
            (Some(a), Some(b)) => a.latent_std[k].min(b.latent_std[k]),
            _ => f64::NAN,
        })
        .collect();
    let sweep_supported_max_std: Vec<f64> = (0..l)
        .map(|k| {
            sweep
                .iter()
                .filter(|p| p.region == Region::Supported)
                .map(|p| p.latent_std[k])
                .fold(0.0, f64::max)
        })
        .collect();
    let ends_dominate = sweep_end_std.iter().zip(&sweep_supported_max_std).all(|(e, s)| e >= s);
    RegionSummary {
        masked_mean_std: masked,
        supported_mean_std: supported,
        masked_to_supported: masked / supported,
        sweep_end_std,
        sweep_supported_max_std,
        ends_dominate,
    }
}

/// Retrains on the masked data and probes uncertainty along a sweep and a scatter set.
#[allow(clippy::too_many_arguments)]
pub fn missing_region_experiment(
    dataset: &Dataset,
    half_range: [f64; 2],
    spec: &MissingRegionSpec,
    ae_spec: AutoencoderSpec,
    ae: &TrainConfig,
    gp: &GpConfig,
    mc: McConfig,
    fem: Option<&FemProblem>,
) -> Result<MissingRegionResult> {
    if !(spec.mask_ratio >= 0.0 && spec.mask_ratio <= 1.0) {
        return Err(Error::Config(format!("mask ratio {} outside [0, 1]", spec.mask_ratio)));
    }
    let radius = spec.mask_ratio * half_range[0].min(half_range[1]);
    let masked = mask_dataset(dataset, radius);
    let (model, report) = train_pipeline(&masked, ae_spec, ae, gp, mc)?;

    let arc = match (spec.sweep_arc, fem) {
        (Some(a), _) => a,
        (None, Some(p)) => p.mesh.loadable_edge().iter().map(|e| e.arc).fold(0.0, f64::max),
        (None, None) => dataset.forces.column(dataset.input_dim() - 1).max(),
    };
    let sweep_in = sweep_inputs(dataset.kind, half_range[1], spec, arc);
    let truth: Vec<Option<Vec<f64>>> = sweep_in
        .iter()
        .map(|x| -> Result<Option<Vec<f64>>> {
            let Some(p) = fem.filter(|_| spec.with_truth) else {
                return Ok(None);
            };
            let load = LoadSpec::from_slice(dataset.kind, x)?;
            Ok(match p.solve(&load) {
                Ok(sol) => Some(model.autoencoder.encode(&sol.displacement.values)?.as_slice().to_vec()),
                Err(_) => None,
            })
        })
        .collect::<Result<_>>()?;
    let sweep = sweep_in
        .iter()
        .zip(&truth)
        .map(|(x, t)| probe(&model, x, radius, half_range, t.as_deref()))
        .collect::<Result<Vec<_>>>()?;
    let scatter = scatter_inputs(dataset.kind, half_range, spec, arc)
        .iter()
        .map(|x| probe(&model, x, radius, half_range, None))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&sweep, &scatter);
    Ok(MissingRegionResult {
        mask_radius: radius,
        train_count: masked.len(),
        removed: dataset.len() - masked.len(),
        model,
        report,
        sweep,
        scatter,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn zero_radius_keeps_everything() {
        let ds = Dataset::new(
            LoadKind::BodyForce,
            DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, 0.1, -2.0, 1.0]),
            DMatrix::zeros(3, 4),
        )
        .unwrap();
        assert_eq!(mask_dataset(&ds, 0.0), ds);
        assert_eq!(mask_dataset(&ds, 1.0).len(), 1);
    }

    #[test]
    fn regions() {
        let r = [2.5, 2.5];
        assert_eq!(classify_region(0.0, 0.5, 1.0, r), Region::Masked);
        assert_eq!(classify_region(0.0, 1.0, 1.0, r), Region::Supported);
        assert_eq!(classify_region(0.0, 2.5, 1.0, r), Region::Supported);
        assert_eq!(classify_region(0.0, -2.6, 1.0, r), Region::Extrapolated);
    }

    #[test]
    fn sweep_spans_the_extension() {
        let s = sweep_inputs(LoadKind::PointLoad, 2.5, &MissingRegionSpec::default(), 2.0);
        assert_eq!(s.len(), 61);
        assert!((s[0][1] + 3.0).abs() < 1e-12 && (s[60][1] - 3.0).abs() < 1e-12);
        assert!(s.iter().all(|x| x[0] == 0.0 && x[2] == 2.0));
    }
}
