//! Run configuration loaded from TOML. Every section is optional and falls
//! back to the built-in defaults, so an empty file is a valid config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::PidFamily;
use crate::engine::EngineParams;
use crate::env::{EndPositions, Env, EnvError};
use crate::td3::Td3Config;
use crate::tuner::GaConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Serialize(#[from] toml::ser::Error),
}

/// Experiment size. `Full` switches the GA and TD3 budgets to the
/// reference values (population 5000 × 20 generations, 100 000 steps).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidSection {
    pub gains: PidFamily,
    pub anti_windup: bool,
}

impl Default for PidSection {
    fn default() -> Self {
        Self { gains: PidFamily::tuned(), anti_windup: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: Scale,
    pub out_dir: PathBuf,
    /// Worker threads for sweeps and GA fitness evaluation; 0 = all cores.
    pub jobs: usize,
    /// Target pressures in bar used by `sweep`/`report` when none is given.
    pub targets: Vec<f64>,
    /// Plant parameters file (TOML) written by `calibrate`; built-in plant if absent.
    pub params_file: Option<PathBuf>,
    /// TD3 checkpoint directory for the RL controller.
    pub checkpoint: Option<PathBuf>,
    pub end_positions: EndPositions,
    pub pid: PidSection,
    pub ga: GaConfig,
    pub td3: Td3Config,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scale: Scale::Desk,
            out_dir: PathBuf::from("runs"),
            jobs: 0,
            targets: vec![80.0, 100.0],
            params_file: None,
            checkpoint: None,
            end_positions: EndPositions::default(),
            pid: PidSection::default(),
            ga: GaConfig::default(),
            td3: Td3Config::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; relative `params_file` and `checkpoint` paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.params_file, &mut cfg.checkpoint].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.targets.is_empty() {
            return Err(ConfigError::Invalid("targets must not be empty".into()));
        }
        if let Some(t) = self.targets.iter().find(|&&t| t != 80.0 && t != 100.0) {
            return Err(ConfigError::Invalid(format!("target {t} bar has no end positions (use 80 or 100)")));
        }
        self.ga.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.td3.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Apply the scale switch to the GA and TD3 budgets.
    pub fn scaled(mut self) -> Self {
        if self.scale == Scale::Full {
            self.ga.population = 5000;
            self.ga.generations = 20;
            self.td3.total_steps = 100_000;
        }
        self
    }

    pub fn engine_params(&self) -> Result<EngineParams, ConfigError> {
        match &self.params_file {
            None => Ok(EngineParams::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source })?;
                toml::from_str(&text).map_err(|source| ConfigError::Parse { path: p.clone(), source })
            }
        }
    }

    pub fn env(&self) -> Result<Env, ConfigError> {
        Env::with_end_positions(self.engine_params()?, self.end_positions)
            .map_err(|e: EnvError| ConfigError::Invalid(e.to_string()))
    }
}
