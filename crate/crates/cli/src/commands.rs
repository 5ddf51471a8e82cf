use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use fieldgp::autoencoder::train;
use fieldgp::datastore::{read_dataset, read_model, write_dataset, write_model, write_report, DatasetInfo, ModelInfo, Table};
use fieldgp::fem::{generate_dataset, LoadSpec};
use fieldgp::surrogate::{evaluate_testset, fit_latent_stage, missing_region_experiment, train_pipeline, ProbePoint};
use fieldgp::{Error, Result, RunConfig};

use crate::{Cli, Command, TrainStage};

struct Context {
    config: RunConfig,
    out: PathBuf,
}

impl Context {
    fn echo(&self) -> serde_json::Value {
        self.config.to_json()
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.apply_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.paths.out = out.display().to_string();
    }
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;

    match cli.command {
        Command::GenData { n_train, n_test } => {
            config.data.n_train = n_train.unwrap_or(config.data.n_train);
            config.data.n_test = n_test.unwrap_or(config.data.n_test);
            config.validate()?;
            gen_data(&context(config))
        }
        Command::Train { data, model, stage, epochs } => {
            config.training.epochs = epochs.unwrap_or(config.training.epochs);
            config.validate()?;
            let ctx = context(config);
            let model = model.unwrap_or_else(|| ctx.out.join("model"));
            train_cmd(&ctx, &data, &model, stage)
        }
        Command::Predict { model, force, name } => {
            config.validate()?;
            predict(&context(config), &model, &force, &name)
        }
        Command::Evaluate { model, data, name } => {
            config.validate()?;
            evaluate(&context(config), &model, &data, &name)
        }
        Command::ExperimentMissing { data, epochs } => {
            config.training.epochs = epochs.unwrap_or(config.training.epochs);
            config.validate()?;
            experiment(&context(config), &data)
        }
        Command::FemSolve { force, name } => {
            config.validate()?;
            fem_solve(&context(config), &force, &name)
        }
    }
}

fn context(config: RunConfig) -> Context {
    let out = PathBuf::from(&config.paths.out);
    Context { config, out }
}

fn print_summary<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("summary serializes"));
}

fn gen_data(ctx: &Context) -> Result<()> {
    let problem = ctx.config.problem()?;
    let spec = ctx.config.generation_spec();
    let generated = generate_dataset(&problem, &spec)?;
    let (train, test) = generated.dataset.split_at(ctx.config.data.n_train);
    let info = DatasetInfo {
        force_range: spec.force_range,
        material: Some(problem.material),
        mesh: problem.mesh.descriptor(),
        generator_seed: spec.seed,
        failures: generated.failures,
        config: ctx.echo(),
    };
    let mut written = Vec::new();
    for (name, part) in [("train", &train), ("test", &test)] {
        if part.is_empty() {
            continue;
        }
        let dir = ctx.out.join("data").join(name);
        let m = write_dataset(&dir, part, &info)?;
        written.push(json!({ "split": name, "path": dir, "n_samples": m.n_samples, "checksum": m.checksum }));
    }
    print_summary(&json!({ "command": "gen-data", "failures": generated.failures, "outputs": written }));
    Ok(())
}

fn loss_table(history: &[f64], validation: &[f64]) -> Table {
    let mut t = Table::new(["epoch", "train_loss", "validation_loss"]);
    for (i, l) in history.iter().enumerate() {
        let v = validation.get(i).map(|v| v.to_string()).unwrap_or_default();
        t.push([i.to_string(), l.to_string(), v]);
    }
    t
}

fn train_cmd(ctx: &Context, data: &Path, model_dir: &Path, stage: TrainStage) -> Result<()> {
    let (dataset, _) = read_dataset(data)?;
    let cfg = &ctx.config;
    let spec = cfg.autoencoder_spec(dataset.field_dim());
    match stage {
        TrainStage::Both => {
            let (model, report) = train_pipeline(&dataset, spec, &cfg.training, &cfg.gp, cfg.surrogate)?;
            let ae = report.autoencoder.as_ref().expect("pipeline trains the autoencoder");
            let info = ModelInfo {
                training: Some(cfg.training.clone()),
                final_loss: Some(ae.final_train_loss),
                final_relative_error: Some(ae.final_relative_error),
                config: ctx.echo(),
            };
            write_model(model_dir, &model.autoencoder, Some(&model.bundle), cfg.surrogate, &info)?;
            let losses = loss_table(&ae.loss_history, &ae.validation_history);
            write_report(model_dir, "training_report", &json!({ "config": ctx.echo(), "report": report }), &[("loss", &losses)])?;
            print_summary(&json!({
                "command": "train", "stage": "both", "model": model_dir,
                "final_loss": ae.final_train_loss, "final_relative_error": ae.final_relative_error,
                "gp_lml": report.gp.iter().map(|r| r.lml).collect::<Vec<_>>(),
            }));
        }
        TrainStage::Auto => {
            let (ae, report) = train(&dataset.displacement_columns(), spec, &cfg.training)
                .map_err(|e| Error::Stage { stage: fieldgp::error::Stage::Autoencoder, source: Box::new(e.into()) })?;
            let info = ModelInfo {
                training: Some(cfg.training.clone()),
                final_loss: Some(report.final_train_loss),
                final_relative_error: Some(report.final_relative_error),
                config: ctx.echo(),
            };
            write_model(model_dir, &ae, None, cfg.surrogate, &info)?;
            let losses = loss_table(&report.loss_history, &report.validation_history);
            write_report(model_dir, "training_report", &json!({ "config": ctx.echo(), "autoencoder": report }), &[("loss", &losses)])?;
            print_summary(&json!({
                "command": "train", "stage": "auto", "model": model_dir,
                "final_loss": report.final_train_loss, "final_relative_error": report.final_relative_error,
            }));
        }
        TrainStage::Gp => {
            let loaded = read_model(model_dir)?;
            let prev = loaded.manifest.autoencoder.clone();
            let (model, reports, _) = fit_latent_stage(loaded.autoencoder, &dataset, &cfg.gp, cfg.surrogate)?;
            let info = ModelInfo {
                training: prev.training,
                final_loss: prev.final_loss,
                final_relative_error: prev.final_relative_error,
                config: ctx.echo(),
            };
            write_model(model_dir, &model.autoencoder, Some(&model.bundle), cfg.surrogate, &info)?;
            write_report(model_dir, "gp_report", &json!({ "config": ctx.echo(), "gp": reports }), &[])?;
            print_summary(&json!({
                "command": "train", "stage": "gp", "model": model_dir,
                "gp_lml": reports.iter().map(|r| r.lml).collect::<Vec<_>>(),
            }));
        }
    }
    Ok(())
}

fn predict(ctx: &Context, model_dir: &Path, force: &[f64], name: &str) -> Result<()> {
    let model = read_model(model_dir)?.surrogate()?;
    let p = model.predict_full(force)?;
    let mut field = Table::new(["dof", "node", "component", "mean", "std", "variance"]);
    for i in 0..p.mean.len() {
        let comp = if i % 2 == 0 { "x" } else { "y" };
        field.push([
            i.to_string(),
            (i / 2).to_string(),
            comp.to_string(),
            p.mean[i].to_string(),
            p.std[i].to_string(),
            p.variance[i].to_string(),
        ]);
    }
    let mut latent = Table::new(["latent", "mean", "variance", "std"]);
    for (l, (m, v)) in p.latent_means.iter().zip(&p.latent_vars).enumerate() {
        latent.push([l.to_string(), m.to_string(), v.to_string(), v.sqrt().to_string()]);
    }
    let dir = ctx.out.join("predict");
    let summary = json!({
        "config": ctx.echo(), "model": model_dir, "force": force,
        "sample_count": model.sample_count, "mc_seed": model.mc_seed,
        "latent_means": p.latent_means, "latent_vars": p.latent_vars,
    });
    let files = write_report(&dir, name, &summary, &[("field", &field), ("latent", &latent)])?;
    print_summary(&json!({ "command": "predict", "outputs": files }));
    Ok(())
}

fn evaluate(ctx: &Context, model_dir: &Path, data: &Path, name: &str) -> Result<()> {
    let model = read_model(model_dir)?.surrogate()?;
    let (dataset, _) = read_dataset(data)?;
    let ev = evaluate_testset(&model, &dataset)?;
    let m = &ev.metrics;
    let mut metrics = Table::new(["M", "mean_error", "std_error", "max_error", "max_nodal_displacement"]);
    metrics.push([
        m.cases.to_string(),
        m.mean_error.to_string(),
        m.std_error.to_string(),
        m.max_error.to_string(),
        m.max_nodal_displacement.to_string(),
    ]);
    let mut health = Table::new(["correct_percent", "healthy_percent"]);
    health.push([ev.health.correct_percent, ev.health.healthy_percent]);
    let mut cases = Table::new(["case", "e_m", "e_max", "mean_e_r", "mean_e_gp", "healthy_latents", "correct"]);
    for (i, c) in ev.cases.iter().enumerate() {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        cases.push([
            i.to_string(),
            c.errors.mean_framework_error().to_string(),
            c.errors.max_framework_error().to_string(),
            mean(&c.errors.e_r).to_string(),
            mean(&c.errors.e_gp).to_string(),
            c.health.healthy.iter().filter(|h| **h).count().to_string(),
            c.health.correct.to_string(),
        ]);
    }
    let summary = json!({
        "config": ctx.echo(), "model": model_dir, "data": data,
        "sample_count": model.sample_count, "mc_seed": model.mc_seed,
        "metrics": m, "healthy_percent": ev.health.healthy_percent, "correct_percent": ev.health.correct_percent,
    });
    let dir = ctx.out.join("evaluate");
    let files = write_report(&dir, name, &summary, &[("metrics", &metrics), ("health", &health), ("cases", &cases)])?;
    print_summary(&json!({
        "command": "evaluate", "mean_error": m.mean_error, "max_error": m.max_error,
        "healthy_percent": ev.health.healthy_percent, "correct_percent": ev.health.correct_percent, "outputs": files,
    }));
    Ok(())
}

fn probe_table(points: &[ProbePoint]) -> Table {
    let mut t = Table::new(["point", "fx", "fy", "region", "latent", "mean", "std", "std_standardized", "abs_error"]);
    for (i, p) in points.iter().enumerate() {
        for l in 0..p.latent_std.len() {
            let err = p.latent_abs_error.as_ref().map(|e| e[l].to_string()).unwrap_or_default();
            t.push([
                i.to_string(),
                p.input[0].to_string(),
                p.input[1].to_string(),
                p.region.as_str().to_string(),
                l.to_string(),
                p.latent_mean[l].to_string(),
                p.latent_std[l].to_string(),
                p.latent_std_standardized[l].to_string(),
                err,
            ]);
        }
    }
    t
}

fn experiment(ctx: &Context, data: &Path) -> Result<()> {
    let cfg = &ctx.config;
    let (dataset, _) = read_dataset(data)?;
    let problem = cfg.problem()?;
    let r = missing_region_experiment(
        &dataset,
        cfg.data.force_range,
        &cfg.experiment,
        cfg.autoencoder_spec(dataset.field_dim()),
        &cfg.training,
        &cfg.gp,
        cfg.surrogate,
        Some(&problem),
    )?;
    let dir = ctx.out.join("experiment");
    let summary = json!({
        "config": ctx.echo(), "data": data, "mask_radius": r.mask_radius,
        "train_count": r.train_count, "removed": r.removed, "summary": r.summary,
    });
    let files = write_report(&dir, "missing", &summary, &[("sweep", &probe_table(&r.sweep)), ("scatter", &probe_table(&r.scatter))])?;
    print_summary(&json!({
        "command": "experiment-missing", "removed": r.removed,
        "masked_to_supported": r.summary.masked_to_supported, "ends_dominate": r.summary.ends_dominate, "outputs": files,
    }));
    Ok(())
}

fn fem_solve(ctx: &Context, force: &[f64], name: &str) -> Result<()> {
    let problem = ctx.config.problem()?;
    let load = LoadSpec::from_slice(ctx.config.data.kind, force)?;
    let sol = problem.solve(&load)?;
    let u = sol.displacement.values.as_slice();
    let mut field = Table::new(["node", "x", "y", "ux", "uy"]);
    for (n, xy) in problem.mesh.node_coords().iter().enumerate() {
        field.push([n.to_string(), xy[0].to_string(), xy[1].to_string(), u[2 * n].to_string(), u[2 * n + 1].to_string()]);
    }
    let summary = json!({
        "config": ctx.echo(), "load": load, "stats": sol.stats,
        "max_nodal_displacement": sol.displacement.max_nodal(), "displacement": u,
    });
    let files = write_report(&ctx.out.join("fem"), name, &summary, &[("field", &field)])?;
    print_summary(&json!({ "command": "fem-solve", "max_nodal_displacement": sol.displacement.max_nodal(), "outputs": files }));
    Ok(())
}
