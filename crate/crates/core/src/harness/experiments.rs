//! Experiment drivers. Each driver returns typed results together with the
//! CSV files it produced, so callers can either inspect values or write them.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::config::{
    AblationAxis, Architecture, DatasetConfig, ExperimentConfig, FisherSplit, NetworkSpec, RetrainTimesteps,
};
use crate::data::{load_idx, synth_blobs, Dataset, Split};
use crate::error::{ensure, Result};
use crate::fisher::{fisher_analysis, layer_maps_to_csv, profiles_to_csv, Estimator, IcPoint, IcTracker};
use crate::lif::{NetworkConfig, ReadoutMode};
use crate::network::{Layer, SpikingNetwork, SynapseOp};
use crate::pruning::{compute_efficiency, cycles_to_csv, iterative_prune, tic_select_timestep, PruneCycle, PruningSchedule};
use crate::robustness::{deficit_sweep, deficit_to_csv, robust_accuracy, robust_to_csv, DeficitRow, RobustRow};
use crate::seeds;
use crate::stbp::{LossConfig, LossMode, TrainReport, Trainer};
use crate::tensor::{Conv2dGeometry, Tensor};

/// Named sub-seeds of one global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub global: u64,
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
    pub fisher: u64,
    pub attack: u64,
}

impl RunSeeds {
    pub fn new(global: u64) -> Self {
        Self {
            global,
            data: seeds::derive(global, "data"),
            init: seeds::derive(global, "init"),
            shuffle: seeds::derive(global, "shuffle"),
            fisher: seeds::derive(global, "fisher"),
            attack: seeds::derive(global, "attack"),
        }
    }
}

/// Named CSV (or JSON) outputs plus a JSON summary for the manifest.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub summary: Value,
}

impl Artifacts {
    fn push(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    /// Write every file into `dir` and return the names written.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(self.files.iter().map(|(n, _)| n.clone()).collect())
    }
}

/// Quote a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let data = match cfg {
        DatasetConfig::Synthetic { spec } => synth_blobs(spec, seed)?,
        DatasetConfig::Idx { train_images, train_labels, test_images, test_labels, classes, range } => {
            let train = load_idx(train_images, train_labels, *range)?;
            let test = load_idx(test_images, test_labels, *range)?;
            let image_shape = train.images.shape()[1..].to_vec();
            ensure!(
                test.images.shape()[1..] == image_shape[..],
                Consistency,
                "train images {:?} and test images {:?} differ in shape",
                image_shape,
                &test.images.shape()[1..]
            );
            Dataset {
                train,
                test,
                classes: *classes,
                image_shape,
                range: *range,
                provenance: format!("idx:{}", train_images.display()),
            }
        }
    };
    data.validate()?;
    Ok(data)
}

fn scaled(width: usize, m: f64) -> usize {
    ((width as f64 * m).round() as usize).max(1)
}

/// Layer stack for an architecture on `[c, h, w]` inputs.
pub fn build_layers(
    arch: &Architecture,
    width_multiplier: f64,
    image_shape: &[usize],
    classes: usize,
    readout: ReadoutMode,
) -> Result<Vec<Layer>> {
    ensure!(image_shape.len() == 3, Dimension, "image shape must be [c, h, w], got {image_shape:?}");
    let mut layers = Vec::new();
    let mut shape = image_shape.to_vec();
    let hidden = match arch {
        Architecture::Mlp { hidden } => hidden,
        Architecture::Conv { channels, kernel, stride, padding, hidden } => {
            for &ch in channels {
                let op = SynapseOp::Conv2d {
                    in_channels: shape[0],
                    out_channels: scaled(ch, width_multiplier),
                    kernel: *kernel,
                    geometry: Conv2dGeometry { stride: *stride, padding: *padding },
                    height: shape[1],
                    width: shape[2],
                };
                shape = op.output_shape()?;
                layers.push(Layer { op, lif: true });
            }
            hidden
        }
    };
    let mut prev: usize = shape.iter().product();
    for &h in hidden {
        let outputs = scaled(h, width_multiplier);
        layers.push(Layer { op: SynapseOp::Affine { inputs: prev, outputs }, lif: true });
        prev = outputs;
    }
    layers.push(Layer {
        op: SynapseOp::Affine { inputs: prev, outputs: classes },
        lif: readout == ReadoutMode::SpikeCount,
    });
    Ok(layers)
}

pub fn build_network(spec: &NetworkSpec, data: &Dataset, seed: u64) -> Result<SpikingNetwork> {
    build_network_with(spec, &spec.architecture, spec.neuron, data, seed)
}

fn build_network_with(
    spec: &NetworkSpec,
    arch: &Architecture,
    neuron: NetworkConfig,
    data: &Dataset,
    seed: u64,
) -> Result<SpikingNetwork> {
    let layers = build_layers(arch, spec.width_multiplier, &data.image_shape, data.classes, neuron.readout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpikingNetwork::initialized(data.image_shape.clone(), layers, neuron, spec.init_gain, &mut rng)
}

/// Parameter count (weights and biases) of an architecture.
pub fn parameter_count(spec: &NetworkSpec, arch: &Architecture, data: &Dataset) -> Result<usize> {
    let layers = build_layers(arch, spec.width_multiplier, &data.image_shape, data.classes, spec.neuron.readout)?;
    Ok(layers.iter().map(|l| l.op.weight_shape().iter().product::<usize>() + l.op.bias_len()).sum())
}

fn split_of(data: &Dataset, which: FisherSplit) -> &Split {
    match which {
        FisherSplit::Train => &data.train,
        FisherSplit::Test => &data.test,
    }
}

/// Samples on which Fisher profiles are measured.
pub fn fisher_images(cfg: &ExperimentConfig, data: &Dataset) -> Tensor {
    split_of(data, cfg.fisher.split).head(cfg.fisher.subset).images
}

pub fn fisher_estimator(cfg: &ExperimentConfig, classes: usize) -> Estimator {
    cfg.fisher.estimator.unwrap_or_else(|| Estimator::default_for(classes))
}

/// One trained model.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub seeds: RunSeeds,
    pub data: Dataset,
    pub net: SpikingNetwork,
    pub report: TrainReport,
    /// Fisher observations, when tracking was requested.
    pub profiles: Vec<IcPoint>,
}

/// Build the dataset and network for `global`, train with `loss`, and track
/// Fisher profiles every `fisher.stride` epochs when `track` is set.
pub fn train_model(cfg: &ExperimentConfig, global: u64, loss: LossConfig, track: bool) -> Result<TrainedModel> {
    let s = RunSeeds::new(global);
    let data = load_dataset(&cfg.dataset, s.data)?;
    let mut net = build_network(&cfg.network, &data, s.init)?;
    let trainer = Trainer::new(&net, cfg.optimizer, loss, s.shuffle);
    let (report, profiles) = if track {
        let mut tracker =
            IcTracker::new(fisher_images(cfg, &data), fisher_estimator(cfg, data.classes), s.fisher, cfg.fisher.stride);
        let report = trainer.run_with_hook(&mut net, &data, &mut |e, n| tracker.observe(e, n))?;
        (report, tracker.series)
    } else {
        (trainer.run(&mut net, &data)?, Vec::new())
    };
    Ok(TrainedModel { seeds: s, data, net, report, profiles })
}

/// Dataset for `global` and either a loaded checkpoint or a freshly trained
/// network.
fn model_for(cfg: &ExperimentConfig, global: u64, checkpoint: Option<&Path>) -> Result<(RunSeeds, Dataset, SpikingNetwork)> {
    match checkpoint {
        Some(p) => {
            let s = RunSeeds::new(global);
            let data = load_dataset(&cfg.dataset, s.data)?;
            let net = SpikingNetwork::load(p)?;
            ensure!(
                net.classes() == data.classes,
                Consistency,
                "checkpoint has {} classes, dataset has {}",
                net.classes(),
                data.classes
            );
            Ok((s, data, net))
        }
        None => {
            let m = train_model(cfg, global, cfg.loss, false)?;
            Ok((m.seeds, m.data, m.net))
        }
    }
}

fn ic_csv(points: &[IcPoint]) -> String {
    let mut s = String::from("epoch,IC\n");
    for p in points {
        let ic = p.profile.centroid.map(|c| c.to_string()).unwrap_or_else(|| "NaN".into());
        s += &format!("{},{}\n", p.epoch, ic);
    }
    s
}

/// Train one model per seed and save checkpoints.
pub fn run_train(cfg: &ExperimentConfig) -> Result<(Vec<TrainedModel>, Artifacts)> {
    let mut art = Artifacts::default();
    let mut models = Vec::new();
    let mut summary = Vec::new();
    for &g in &cfg.seeds {
        let m = train_model(cfg, g, cfg.loss, false)?;
        art.push(format!("train_seed{g}.csv"), m.report.to_csv());
        art.push(format!("checkpoint_seed{g}.json"), m.net.to_checkpoint_json()?);
        summary.push(json!({ "seed": g, "test_accuracy": m.report.final_test_accuracy() }));
        models.push(m);
    }
    art.summary = json!({ "models": summary });
    Ok((models, art))
}

/// Fisher profiles over training (or of one checkpoint, recorded as epoch 0).
pub fn run_fisher(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(Vec<Vec<IcPoint>>, Artifacts)> {
    let mut art = Artifacts::default();
    let mut all = Vec::new();
    let mut summary = Vec::new();
    for &g in &cfg.seeds {
        let points = match checkpoint {
            Some(_) => {
                let (s, data, net) = model_for(cfg, g, checkpoint)?;
                let est = fisher_estimator(cfg, data.classes);
                let (profile, layers) = fisher_analysis(&net, &fisher_images(cfg, &data), est, s.fisher)?;
                vec![IcPoint { epoch: 0, profile, layers }]
            }
            None => {
                let m = train_model(cfg, g, cfg.loss, true)?;
                art.push(format!("train_seed{g}.csv"), m.report.to_csv());
                m.profiles
            }
        };
        art.push(format!("fisher_seed{g}.csv"), profiles_to_csv(&points));
        art.push(format!("layers_seed{g}.csv"), layer_maps_to_csv(&points, false));
        art.push(format!("layers_normalized_seed{g}.csv"), layer_maps_to_csv(&points, true));
        art.push(format!("ic_seed{g}.csv"), ic_csv(&points));
        summary.push(json!({
            "seed": g,
            "ic": points.iter().map(|p| json!([p.epoch, p.profile.centroid])).collect::<Vec<_>>(),
        }));
        all.push(points);
    }
    art.summary = json!({ "series": summary });
    Ok((all, art))
}

/// Outcome of one ablation cell.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub index: usize,
    pub value: Value,
    pub seed: u64,
    /// Per-epoch Fisher observations, or the error that stopped the cell.
    pub outcome: std::result::Result<Vec<IcPoint>, String>,
}

impl AblationCell {
    pub fn ic_series(&self) -> Option<Vec<(usize, f64)>> {
        self.outcome
            .as_ref()
            .ok()
            .map(|ps| ps.iter().map(|p| (p.epoch, p.profile.centroid.unwrap_or(f64::NAN))).collect())
    }
}

/// Train one model per axis value and seed, tracking Fisher profiles. Cells
/// that fail are recorded and skipped.
pub fn run_ablation_grid(
    cfg: &ExperimentConfig,
    axis: AblationAxis,
    values: &[Value],
) -> Result<(Vec<AblationCell>, Artifacts)> {
    ensure!(!values.is_empty(), Config, "ablation needs at least one value");
    let mut art = Artifacts::default();
    let mut cells = Vec::new();
    let mut grid = String::from("cell,value,seed,epoch,t,I_t,IC\n");
    let mut failed = String::from("cell,value,seed,error\n");
    for (i, v) in values.iter().enumerate() {
        let vtext = csv_field(&v.to_string());
        for &g in &cfg.seeds {
            let outcome = ablation_cell(cfg, axis, v, g).map_err(|e| e.to_string());
            match &outcome {
                Ok(points) => {
                    art.push(format!("cell{i}_seed{g}.csv"), profiles_to_csv(points));
                    for p in points {
                        let ic = p.profile.centroid.map(|c| c.to_string()).unwrap_or_else(|| "NaN".into());
                        for (t, it) in p.profile.traces.iter().enumerate() {
                            grid += &format!("{i},{vtext},{g},{},{},{it},{ic}\n", p.epoch, t + 1);
                        }
                    }
                }
                Err(e) => failed += &format!("{i},{vtext},{g},{}\n", csv_field(e)),
            }
            cells.push(AblationCell { index: i, value: v.clone(), seed: g, outcome });
        }
    }
    art.push("grid.csv", grid);
    art.push("failed_cells.csv", failed);
    art.summary = json!({
        "axis": axis,
        "cells": cells.iter().map(|c| json!({
            "cell": c.index,
            "value": c.value,
            "seed": c.seed,
            "ok": c.outcome.is_ok(),
            "error": c.outcome.as_ref().err(),
        })).collect::<Vec<_>>(),
    });
    Ok((cells, art))
}

fn ablation_cell(cfg: &ExperimentConfig, axis: AblationAxis, value: &Value, global: u64) -> Result<Vec<IcPoint>> {
    let path = format!("{}={}", axis.path(), value);
    let cell_cfg = cfg.with_overrides(&[path])?;
    Ok(train_model(&cell_cfg, global, cell_cfg.loss, true)?.profiles)
}

/// Robustness table row set plus per-model statistics.
#[derive(Debug, Clone)]
pub struct RobustModel {
    pub model_id: String,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub test_accuracy: f64,
    pub mean_trace: f64,
    pub centroid: Option<f64>,
    pub rows: Vec<RobustRow>,
}

/// Train one model per α (or one with `loss`) per seed, then evaluate every
/// configured corruption on the test split.
pub fn run_robust(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(Vec<RobustModel>, Artifacts)> {
    let mut variants: Vec<(Option<f64>, LossConfig)> =
        cfg.robustness.alphas.iter().map(|&a| (Some(a), LossConfig { mode: LossMode::AlphaTarget, alpha: a, ..cfg.loss })).collect();
    if variants.is_empty() || checkpoint.is_some() {
        variants = vec![(None, cfg.loss)];
    }
    let mut models = Vec::new();
    for &g in &cfg.seeds {
        for &(alpha, loss) in &variants {
            let (s, data, net) = match checkpoint {
                Some(_) => model_for(cfg, g, checkpoint)?,
                None => {
                    let m = train_model(cfg, g, loss, false)?;
                    (m.seeds, m.data, m.net)
                }
            };
            let split = match cfg.robustness.subset {
                Some(n) => data.test.head(n),
                None => data.test.clone(),
            };
            let model_id = match alpha {
                Some(a) => format!("alpha={a};seed={g}"),
                None => format!("seed={g}"),
            };
            let est = fisher_estimator(cfg, data.classes);
            let (profile, _) = fisher_analysis(&net, &fisher_images(cfg, &data), est, s.fisher)?;
            let dataset_name = data.provenance.clone();
            let rows = cfg
                .robustness
                .corruptions
                .iter()
                .map(|c| robust_accuracy(&net, &split, data.range, c, &model_id, &dataset_name, s.attack))
                .collect::<Result<Vec<_>>>()?;
            models.push(RobustModel {
                model_id,
                alpha,
                seed: g,
                test_accuracy: net.accuracy(&data.test.images, &data.test.labels, net.config.timesteps)?,
                mean_trace: profile.mean_trace(),
                centroid: profile.centroid,
                rows,
            });
        }
    }
    let mut art = Artifacts::default();
    let rows: Vec<RobustRow> = models.iter().flat_map(|m| m.rows.clone()).collect();
    art.push("robustness.csv", robust_to_csv(&rows));
    let mut s = String::from("model id,alpha,seed,test_acc,mean_I,IC\n");
    for m in &models {
        s += &format!(
            "{},{},{},{},{},{}\n",
            csv_field(&m.model_id),
            m.alpha.map(|a| a.to_string()).unwrap_or_default(),
            m.seed,
            m.test_accuracy,
            m.mean_trace,
            m.centroid.map(|c| c.to_string()).unwrap_or_else(|| "NaN".into())
        );
    }
    art.push("models.csv", s);
    art.summary = json!({ "models": models.len(), "rows": rows.len() });
    Ok((models, art))
}

/// Deficit sweep for every seed.
pub fn run_deficit(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(Vec<Vec<DeficitRow>>, Artifacts)> {
    let mut art = Artifacts::default();
    let mut all = Vec::new();
    let mut summary = Vec::new();
    for &g in &cfg.seeds {
        let (s, data, net) = model_for(cfg, g, checkpoint)?;
        let rows = deficit_sweep(&net, &data.test, cfg.deficit.length, cfg.deficit.noise_ratio, s.attack)?;
        let clean = net.accuracy(&data.test.images, &data.test.labels, net.config.timesteps)?;
        art.push(format!("deficit_seed{g}.csv"), deficit_to_csv(&rows));
        summary.push(json!({ "seed": g, "clean_accuracy": clean }));
        all.push(rows);
    }
    art.summary = json!({ "runs": summary });
    Ok((all, art))
}

/// Pruning curves of one seed.
#[derive(Debug, Clone)]
pub struct PruneRun {
    pub seed: u64,
    pub base_accuracy: f64,
    pub tic_timestep: usize,
    /// Wall-clock cost of the Fisher profile that chose the TIC timestep.
    /// Not included in the efficiency figures.
    pub profiling_seconds: f64,
    /// Wall-clock cost of the first training stage.
    pub base_training_seconds: f64,
    /// `(choice, resolved T_retrain, cycles, efficiency %)`.
    pub curves: Vec<(RetrainTimesteps, usize, Vec<PruneCycle>, f64)>,
}

/// Train a base model per seed, then prune a copy of it for every
/// configured retraining timestep choice.
pub fn run_prune(cfg: &ExperimentConfig) -> Result<(Vec<PruneRun>, Artifacts)> {
    let mut art = Artifacts::default();
    let mut runs = Vec::new();
    let t_full = cfg.network.neuron.timesteps;
    for &g in &cfg.seeds {
        let base = train_model(cfg, g, cfg.loss, false)?;
        let est = fisher_estimator(cfg, base.data.classes);
        let profiling = std::time::Instant::now();
        let (profile, _) = fisher_analysis(&base.net, &fisher_images(cfg, &base.data), est, base.seeds.fisher)?;
        let tic = tic_select_timestep(&profile, cfg.pruning.kappa)?;
        let profiling_seconds = profiling.elapsed().as_secs_f64();
        let mut curves = Vec::new();
        for &choice in &cfg.pruning.retrain_timesteps {
            let tr = match choice {
                RetrainTimesteps::Full => t_full,
                RetrainTimesteps::Tic => tic,
                RetrainTimesteps::Fixed(t) => t,
            };
            let schedule = PruningSchedule {
                fraction: cfg.pruning.fraction,
                cycles: cfg.pruning.cycles,
                retrain_epochs: cfg.pruning.retrain_epochs,
                first_stage_epochs: cfg.optimizer.epochs,
                timesteps: t_full,
                retrain_timesteps: tr,
            };
            let mut net = base.net.clone();
            let (cycles, _) = iterative_prune(
                &mut net,
                &base.data,
                &schedule,
                &cfg.optimizer,
                &cfg.loss,
                base.seeds.shuffle,
                &mut |_, _| Ok(()),
            )?;
            art.push(format!("prune_seed{g}_{}.csv", choice.label()), cycles_to_csv(&cycles));
            curves.push((choice, tr, cycles, schedule.efficiency()?));
        }
        runs.push(PruneRun {
            seed: g,
            base_accuracy: base.report.final_test_accuracy(),
            tic_timestep: tic,
            profiling_seconds,
            base_training_seconds: base.report.epochs.iter().map(|e| e.seconds).sum(),
            curves,
        });
    }
    art.summary = json!({
        "runs": runs.iter().map(|r| json!({
            "seed": r.seed,
            "base_accuracy": r.base_accuracy,
            "tic_timestep": r.tic_timestep,
            "profiling_seconds": r.profiling_seconds,
            "base_training_seconds": r.base_training_seconds,
            "choices": r.curves.iter().map(|(c, t, _, e)| json!({
                "choice": c.label(), "retrain_timesteps": t, "efficiency_percent": e,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    Ok((runs, art))
}

/// Accuracy of one network size across timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityCurve {
    pub name: &'static str,
    pub parameters: usize,
    pub seed: u64,
    /// `(T, accuracy)`.
    pub accuracy: Vec<(usize, f64)>,
    pub saturation: usize,
}

/// First `T` whose accuracy is within 1 point of the best.
pub fn saturation_timestep(accuracy: &[(usize, f64)]) -> Result<usize> {
    ensure!(!accuracy.is_empty(), Domain, "empty timestep list");
    let best = accuracy.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(accuracy.iter().find(|a| a.1 >= best - 0.01).map(|a| a.0).expect("best is attained"))
}

/// Train the small and large architectures at every configured `T`.
pub fn run_capacity_study(cfg: &ExperimentConfig) -> Result<(Vec<CapacityCurve>, Artifacts)> {
    let cap = &cfg.capacity;
    ensure!(!cap.timesteps.is_empty(), Domain, "capacity study needs at least one timestep value");
    ensure!(cap.timesteps.iter().all(|&t| t >= 1), Domain, "timesteps must be at least 1");
    let mut curves = Vec::new();
    for &g in &cfg.seeds {
        let s = RunSeeds::new(g);
        let data = load_dataset(&cfg.dataset, s.data)?;
        let small = parameter_count(&cfg.network, &cap.small, &data)?;
        let large = parameter_count(&cfg.network, &cap.large, &data)?;
        ensure!(small < large, Domain, "small net has {small} parameters, large has {large}; need small < large");
        for (name, arch, params) in [("small", &cap.small, small), ("large", &cap.large, large)] {
            let mut acc = Vec::new();
            for &t in &cap.timesteps {
                let neuron = NetworkConfig { timesteps: t, ..cfg.network.neuron };
                let mut net = build_network_with(&cfg.network, arch, neuron, &data, s.init)?;
                Trainer::new(&net, cfg.optimizer, cfg.loss, s.shuffle).run(&mut net, &data)?;
                acc.push((t, net.accuracy(&data.test.images, &data.test.labels, t)?));
            }
            let saturation = saturation_timestep(&acc)?;
            curves.push(CapacityCurve { name, parameters: params, seed: g, accuracy: acc, saturation });
        }
    }
    let mut table = String::from("net,params,seed,T,accuracy\n");
    let mut sat = String::from("net,params,seed,saturation_T\n");
    for c in &curves {
        for (t, a) in &c.accuracy {
            table += &format!("{},{},{},{t},{a}\n", c.name, c.parameters, c.seed);
        }
        sat += &format!("{},{},{},{}\n", c.name, c.parameters, c.seed, c.saturation);
    }
    let mut art = Artifacts::default();
    art.push("capacity.csv", table);
    art.push("saturation.csv", sat);
    art.summary = json!({
        "saturation": curves.iter().map(|c| json!({ "net": c.name, "seed": c.seed, "T": c.saturation })).collect::<Vec<_>>(),
    });
    Ok((curves, art))
}

/// Efficiency of the configured schedule for a given `T_retrain`.
pub fn schedule_efficiency(cfg: &ExperimentConfig, retrain_timesteps: usize) -> Result<f64> {
    compute_efficiency(
        cfg.optimizer.epochs,
        cfg.pruning.retrain_epochs,
        cfg.pruning.cycles,
        cfg.network.neuron.timesteps,
        retrain_timesteps,
    )
}
