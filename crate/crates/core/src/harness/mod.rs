//! Config-driven experiment orchestration, result emission and the CLI.

pub mod cli;
pub mod config;
pub mod experiments;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::ExperimentConfig;
pub use experiments::{
    run_ablation_grid, run_capacity_study, run_deficit, run_fisher, run_prune, run_robust, run_train, Artifacts,
    RunSeeds,
};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Record written beside every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parallel: bool,
    /// Fully resolved config; loading it with `--config` re-runs the same
    /// experiment.
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedRecord>,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub global: u64,
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
    pub fisher: u64,
    pub attack: u64,
}

impl From<RunSeeds> for SeedRecord {
    fn from(s: RunSeeds) -> Self {
        Self { global: s.global, data: s.data, init: s.init, shuffle: s.shuffle, fisher: s.fisher, attack: s.attack }
    }
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, outputs: Vec<String>, summary: Value, secs: f64) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            parallel: crate::parallel::is_enabled(),
            config: config.clone(),
            seeds: config.seeds.iter().map(|&g| RunSeeds::new(g).into()).collect(),
            outputs,
            summary,
            wall_time_seconds: secs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Load an experiment config, accepting either a config document or a
/// manifest (whose resolved `config` is used).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.into(), source })?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let doc = match value.get("manifest_version") {
        Some(_) => value
            .get("config")
            .cloned()
            .ok_or_else(|| Error::Config(format!("{}: manifest has no config", path.display())))?,
        None => value,
    };
    let cfg: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
