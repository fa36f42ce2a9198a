//! Experiment configuration: JSON schema, validation and dot-path overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::SynthSpec;
use crate::error::{ensure, Error, Result};
use crate::fisher::Estimator;
use crate::lif::NetworkConfig;
use crate::robustness::{AttackParams, Corruption};
use crate::stbp::{LossConfig, OptimizerConfig};

/// Where images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        #[serde(default)]
        spec: SynthSpec,
    },
    /// Four IDX files. Pixels are rescaled from bytes to `range`.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        classes: usize,
        #[serde(default = "unit_range")]
        range: (f64, f64),
    },
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic { spec: SynthSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    /// LIF hidden layers of the given widths, then an affine readout.
    Mlp { hidden: Vec<usize> },
    /// LIF convolutions (`kernel`×`kernel`, `padding`, `stride`) followed by
    /// LIF dense layers and an affine readout.
    Conv {
        channels: Vec<usize>,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default)]
        hidden: Vec<usize>,
    },
}

fn one() -> usize {
    1
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::Mlp { hidden: vec![64] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub architecture: Architecture,
    /// Scales every hidden width and channel count (rounded, at least 1).
    #[serde(default = "unit")]
    pub width_multiplier: f64,
    #[serde(default = "unit")]
    pub init_gain: f64,
    #[serde(default)]
    pub neuron: NetworkConfig,
}

fn unit() -> f64 {
    1.0
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { architecture: Architecture::default(), width_multiplier: 1.0, init_gain: 1.0, neuron: NetworkConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FisherSplit {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherConfig {
    /// `null` selects exact enumeration up to the class limit and a single
    /// Monte-Carlo draw beyond it.
    #[serde(default)]
    pub estimator: Option<Estimator>,
    /// Number of leading samples of `split` used for every profile.
    #[serde(default = "default_subset")]
    pub subset: usize,
    /// Profile every `stride` epochs, epoch 0 included.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub split: FisherSplit,
}

fn default_subset() -> usize {
    256
}

fn default_stride() -> usize {
    5
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self { estimator: None, subset: default_subset(), stride: default_stride(), split: FisherSplit::Test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// One model is trained per α with the α-target loss; empty means a
    /// single model with the `loss` section as given.
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default = "default_corruptions")]
    pub corruptions: Vec<Corruption>,
    /// Evaluate on the first `subset` test samples; `null` uses all.
    #[serde(default)]
    pub subset: Option<usize>,
}

fn default_corruptions() -> Vec<Corruption> {
    let clamp = (0.0, 1.0);
    vec![
        Corruption::Attack(AttackParams::fgsm_default(clamp)),
        Corruption::Attack(AttackParams::pgd_default(clamp)),
        Corruption::Gaussian { ratio: 0.5, clamp: false },
        Corruption::Blur { factor: 2 },
    ]
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { alphas: Vec::new(), corruptions: default_corruptions(), subset: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeficitConfig {
    pub length: usize,
    pub noise_ratio: f64,
}

impl Default for DeficitConfig {
    fn default() -> Self {
        Self { length: 3, noise_ratio: 0.5 }
    }
}

/// Timestep count used while retraining pruned networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainTimesteps {
    /// The network's own `T`.
    Full,
    /// Selected from the trained network's Fisher profile with `kappa`.
    Tic,
    Fixed(usize),
}

impl RetrainTimesteps {
    pub fn label(&self) -> String {
        match self {
            RetrainTimesteps::Full => "full".into(),
            RetrainTimesteps::Tic => "tic".into(),
            RetrainTimesteps::Fixed(t) => t.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningConfig {
    pub fraction: f64,
    pub cycles: usize,
    pub retrain_epochs: usize,
    pub kappa: f64,
    /// Each choice prunes its own copy of the same trained network.
    pub retrain_timesteps: Vec<RetrainTimesteps>,
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            cycles: 5,
            retrain_epochs: 10,
            kappa: 0.05,
            retrain_timesteps: vec![RetrainTimesteps::Full, RetrainTimesteps::Tic, RetrainTimesteps::Fixed(1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Timestep,
    TimeConstant,
    WeightDecay,
    LearningRate,
    Dataset,
    Architecture,
}

impl AblationAxis {
    /// Config path the axis overrides.
    pub fn path(&self) -> &'static str {
        match self {
            AblationAxis::Timestep => "network.neuron.timesteps",
            AblationAxis::TimeConstant => "network.neuron.tau",
            AblationAxis::WeightDecay => "optimizer.weight_decay",
            AblationAxis::LearningRate => "optimizer.lr",
            AblationAxis::Dataset => "dataset",
            AblationAxis::Architecture => "network.architecture",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub axis: AblationAxis,
    /// Values substituted at the axis path, one cell each.
    pub values: Vec<Value>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { axis: AblationAxis::Timestep, values: vec![2.into(), 4.into(), 6.into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub small: Architecture,
    pub large: Architecture,
    pub timesteps: Vec<usize>,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            small: Architecture::Mlp { hidden: vec![8] },
            large: Architecture::Mlp { hidden: vec![128] },
            timesteps: vec![1, 2, 4, 8],
        }
    }
}

/// Complete description of a run. Every section has defaults, so `{}` is a
/// valid config describing the toy experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub fisher: FisherConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub deficit: DeficitConfig,
    #[serde(default)]
    pub pruning: PruningConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Apply `key=value` overrides to the fully resolved config.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut v = self.to_value();
        for o in overrides {
            let (path, raw) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            set_path(&mut v, path.trim(), parse_value(raw.trim()))?;
        }
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.neuron.validate()?;
        self.optimizer.validate()?;
        self.loss.validate()?;
        ensure!(
            self.network.width_multiplier > 0.0 && self.network.width_multiplier.is_finite(),
            Config,
            "width multiplier must be positive"
        );
        ensure!(self.network.init_gain > 0.0, Config, "init gain must be positive");
        ensure!(!self.seeds.is_empty(), Config, "seed list is empty");
        ensure!(self.fisher.subset >= 1, Config, "fisher subset must be at least 1");
        ensure!(self.fisher.stride >= 1, Config, "fisher stride must be at least 1");
        if let Some(Estimator::MonteCarlo { draws }) = self.fisher.estimator {
            ensure!(draws >= 1, Config, "Monte-Carlo estimator needs at least one draw");
        }
        ensure!(
            self.deficit.length >= 1 && self.deficit.length <= self.network.neuron.timesteps,
            Config,
            "deficit length {} outside [1, {}]",
            self.deficit.length,
            self.network.neuron.timesteps
        );
        ensure!(
            self.deficit.noise_ratio > 0.0 && self.deficit.noise_ratio <= 1.0,
            Config,
            "deficit noise ratio must lie in (0, 1]"
        );
        for c in &self.robustness.corruptions {
            if let Corruption::Attack(p) = c {
                p.validate()?;
            }
        }
        for &a in &self.robustness.alphas {
            ensure!(a >= 0.0 && a.is_finite(), Config, "alpha {a} must be non-negative");
        }
        let p = &self.pruning;
        ensure!(p.fraction > 0.0 && p.fraction < 1.0, Config, "prune fraction must lie in (0, 1)");
        ensure!(p.cycles >= 1 && p.retrain_epochs >= 1, Config, "pruning needs cycles and retrain epochs");
        ensure!(p.kappa > 0.0 && p.kappa < 1.0, Config, "kappa must lie in (0, 1)");
        for r in &p.retrain_timesteps {
            if let RetrainTimesteps::Fixed(t) = r {
                ensure!(
                    *t >= 1 && *t <= self.network.neuron.timesteps,
                    Config,
                    "retrain timesteps {t} outside [1, {}]",
                    self.network.neuron.timesteps
                );
            }
        }
        Ok(())
    }
}

/// JSON literal if it parses as one, otherwise a string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Replace the value at a dot path. Every segment must already exist, so
/// typos surface as errors instead of silently added keys.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    ensure!(!path.is_empty(), Config, "empty override path");
    let mut cur = root;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(map) => map
                .get_mut(seg)
                .ok_or_else(|| Error::Config(format!("unknown config key `{seg}` in `{path}`")))?,
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("`{seg}` in `{path}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| Error::Config(format!("index {i} out of bounds ({len}) in `{path}`")))?
            }
            _ => return Err(Error::Config(format!("`{path}` descends into a scalar at `{seg}`"))),
        };
    }
    *cur = value;
    Ok(())
}
