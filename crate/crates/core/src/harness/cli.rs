//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::config::{DatasetConfig, ExperimentConfig};
use super::experiments::{self, load_dataset, Artifacts, RunSeeds};
use super::{load_config, Manifest};
use crate::data::{encode_idx_images, encode_idx_labels, Split};
use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "tic-snn", version, about = "Temporal Fisher information experiments on spiking neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON experiment config (or a manifest from an earlier run).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run with this single global seed instead of the config's seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dot-path override such as `loss.alpha=0.01`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Evaluate this checkpoint instead of training a model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per seed and save checkpoints.
    Train(RunArgs),
    /// Fisher profiles over training, or of a checkpoint.
    Fisher(ModelArgs),
    /// Ablation grid over one configuration axis.
    Ablate(RunArgs),
    /// Accuracy under attacks and corruptions.
    Robust(ModelArgs),
    /// Time-windowed deficit sweep.
    Deficit(ModelArgs),
    /// Iterative magnitude pruning with several retraining timestep choices.
    Prune(RunArgs),
    /// Small versus large network accuracy across timesteps.
    Capacity(RunArgs),
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Render the configured synthetic dataset to IDX files.
    Gen(RunArgs),
    /// Summarize the configured dataset.
    Inspect(RunArgs),
}

/// Parse `argv` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn resolve_model(args: &ModelArgs) -> Result<ExperimentConfig, Failure> {
    if let Some(p) = &args.checkpoint {
        if !p.is_file() {
            return Err(Failure::Usage(format!("checkpoint {} does not exist", p.display())));
        }
    }
    resolve(&args.run)
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let base = match &args.config {
        Some(p) => load_config(p).map_err(|e| Failure::Usage(config_message(p, e)))?,
        None => ExperimentConfig::default(),
    };
    let mut overrides = Vec::new();
    if let Some(s) = args.seed {
        overrides.push(format!("seeds=[{s}]"));
    }
    if let Some(o) = &args.out {
        overrides.push(format!("out={}", serde_json::Value::String(o.display().to_string())));
    }
    overrides.extend(args.overrides.iter().cloned());
    base.with_overrides(&overrides).map_err(|e| Failure::Usage(e.to_string()))
}

fn config_message(path: &Path, e: Error) -> String {
    match e {
        Error::Read { source, .. } => format!("cannot read config {}: {source}", path.display()),
        other => format!("invalid config {}: {other}", path.display()),
    }
}

fn finish(command: &str, cfg: &ExperimentConfig, art: Artifacts, start: Instant) -> Result<(), Failure> {
    let outputs = art.write(&cfg.out)?;
    let manifest = Manifest::new(command, cfg, outputs, art.summary, start.elapsed().as_secs_f64());
    manifest.write(&cfg.out)?;
    let _ = writeln!(
        std::io::stdout().lock(),
        "{command}: wrote {} files and manifest.json to {}",
        manifest.outputs.len(),
        cfg.out.display()
    );
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    let start = Instant::now();
    match command {
        Command::Train(a) => {
            let cfg = resolve(&a)?;
            let (_, art) = experiments::run_train(&cfg)?;
            finish("train", &cfg, art, start)
        }
        Command::Fisher(a) => {
            let cfg = resolve_model(&a)?;
            let (_, art) = experiments::run_fisher(&cfg, a.checkpoint.as_deref())?;
            finish("fisher", &cfg, art, start)
        }
        Command::Ablate(a) => {
            let cfg = resolve(&a)?;
            let (_, art) = experiments::run_ablation_grid(&cfg, cfg.ablation.axis, &cfg.ablation.values)?;
            finish("ablate", &cfg, art, start)
        }
        Command::Robust(a) => {
            let cfg = resolve_model(&a)?;
            let (_, art) = experiments::run_robust(&cfg, a.checkpoint.as_deref())?;
            finish("robust", &cfg, art, start)
        }
        Command::Deficit(a) => {
            let cfg = resolve_model(&a)?;
            let (_, art) = experiments::run_deficit(&cfg, a.checkpoint.as_deref())?;
            finish("deficit", &cfg, art, start)
        }
        Command::Prune(a) => {
            let cfg = resolve(&a)?;
            let (_, art) = experiments::run_prune(&cfg)?;
            finish("prune", &cfg, art, start)
        }
        Command::Capacity(a) => {
            let cfg = resolve(&a)?;
            let (_, art) = experiments::run_capacity_study(&cfg)?;
            finish("capacity", &cfg, art, start)
        }
        Command::Dataset(DatasetCommand::Gen(a)) => {
            let cfg = resolve(&a)?;
            let art = dataset_gen(&cfg)?;
            finish("dataset gen", &cfg, art, start)
        }
        Command::Dataset(DatasetCommand::Inspect(a)) => {
            let cfg = resolve(&a)?;
            let art = dataset_inspect(&cfg)?;
            let text = serde_json::to_string_pretty(&art.summary).map_err(Error::from)?;
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            finish("dataset inspect", &cfg, art, start)
        }
    }
}

const IDX_NAMES: [&str; 4] =
    ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "test-images-idx3-ubyte", "test-labels-idx1-ubyte"];

/// IDX files for the first seed's dataset, plus a config that loads them.
fn dataset_gen(cfg: &ExperimentConfig) -> Result<Artifacts, Failure> {
    let DatasetConfig::Synthetic { .. } = cfg.dataset else {
        return Err(Failure::Usage("dataset gen needs a synthetic dataset config".into()));
    };
    let seed = RunSeeds::new(cfg.seeds[0]);
    let data = load_dataset(&cfg.dataset, seed.data)?;
    for (split, [img, lab]) in [(&data.train, [IDX_NAMES[0], IDX_NAMES[1]]), (&data.test, [IDX_NAMES[2], IDX_NAMES[3]])] {
        std::fs::create_dir_all(&cfg.out).map_err(Error::from)?;
        std::fs::write(cfg.out.join(img), encode_idx_images(&split.images, data.range)?).map_err(Error::from)?;
        std::fs::write(cfg.out.join(lab), encode_idx_labels(&split.labels)?).map_err(Error::from)?;
    }
    let abs = |n: &str| std::path::absolute(cfg.out.join(n)).unwrap_or_else(|_| cfg.out.join(n));
    let idx_cfg = ExperimentConfig {
        dataset: DatasetConfig::Idx {
            train_images: abs(IDX_NAMES[0]),
            train_labels: abs(IDX_NAMES[1]),
            test_images: abs(IDX_NAMES[2]),
            test_labels: abs(IDX_NAMES[3]),
            classes: data.classes,
            range: data.range,
        },
        ..cfg.clone()
    };
    let mut art = Artifacts::default();
    art.files.push(("idx_config.json".into(), serde_json::to_string_pretty(&idx_cfg).map_err(Error::from)?));
    art.summary = json!({
        "idx_files": IDX_NAMES,
        "provenance": data.provenance,
        "train": data.train.len(),
        "test": data.test.len(),
    });
    Ok(art)
}

fn split_summary(s: &Split, classes: usize) -> serde_json::Value {
    let mut counts = vec![0usize; classes];
    for &y in &s.labels {
        counts[y] += 1;
    }
    let px = s.images.data();
    let mean = if px.is_empty() { 0.0 } else { px.iter().sum::<f64>() / px.len() as f64 };
    let (lo, hi) = px.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    json!({ "samples": s.len(), "class_counts": counts, "pixel_mean": mean, "pixel_min": lo, "pixel_max": hi })
}

fn dataset_inspect(cfg: &ExperimentConfig) -> Result<Artifacts, Failure> {
    let data = load_dataset(&cfg.dataset, RunSeeds::new(cfg.seeds[0]).data)?;
    let summary = json!({
        "provenance": data.provenance,
        "classes": data.classes,
        "image_shape": data.image_shape,
        "range": data.range,
        "train": split_summary(&data.train, data.classes),
        "test": split_summary(&data.test, data.classes),
    });
    Ok(Artifacts { files: Vec::new(), summary })
}
