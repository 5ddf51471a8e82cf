//! `fieldgp`: scripted driver for data generation, training, prediction and evaluation.

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fieldgp", version, about = "Autoencoder + GP surrogate for hyperelastic beam deformation")]
pub struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainStage {
    Auto,
    Gp,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate FEM training and test datasets into `<out>/data/{train,test}`.
    GenData {
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Train the autoencoder and/or the latent GPs.
    Train {
        /// Training dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Model directory (default `<out>/model`).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TrainStage::Both)]
        stage: TrainStage,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Probabilistic full-field prediction for one load vector.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Load components: `fx fy d` for point loads, `bx by` for body forces.
        #[arg(required = true, num_args = 1.., allow_negative_numbers = true)]
        force: Vec<f64>,
        /// Report file stem.
        #[arg(long, default_value = "prediction")]
        name: String,
    },
    /// Error metrics and latent health on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "evaluation")]
        name: String,
    },
    /// Retrain without small-magnitude loads and probe predictive uncertainty.
    ExperimentMissing {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Solve one FEM load case and dump the displacement field.
    FemSolve {
        #[arg(required = true, num_args = 1.., allow_negative_numbers = true)]
        force: Vec<f64>,
        #[arg(long, default_value = "solution")]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = exit::Category::of(&e);
            let line = serde_json::json!({
                "error": category.as_str(),
                "exit_code": category.code(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(category.code())
        }
    }
}
