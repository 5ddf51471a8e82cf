//! Two-stage training, Monte-Carlo decoding and evaluation of the full surrogate.

pub mod experiment;
pub mod metrics;
pub mod model;
pub mod predict;

pub use experiment::{
    classify_region, mask_dataset, missing_region_experiment, MissingRegionResult, MissingRegionSpec,
    ProbePoint, Region, RegionSummary,
};
pub use metrics::{
    classify_latent_health, error_decompose, evaluate_case, evaluate_testset, CaseEvaluation, ErrorReport,
    Evaluation, HealthReport, LatentHealth, TestMetrics,
};
pub use model::{fit_latent_stage, input_key, train_pipeline, McConfig, PipelineReport, SurrogateModel};
pub use predict::{column_statistics, latent_samples, monte_carlo_decode, AffineDecoder, FieldDecoder, PredictionField};
