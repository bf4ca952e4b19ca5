//! Engine configuration file (TOML).
//!
//! Every key is optional; missing keys take the defaults below (the staged
//! 90/150/365-day schedule and standard fitness weights). Relative `store` and
//! `checkpoints` paths are resolved under `output_dir`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::BrokerConfig;
use crate::evaluator::{EvalSettings, SelectionCriteria};
use crate::fitness::{FitnessOption, FitnessWeights};
use crate::indicators::IndicatorConfig;
use crate::market_data::{SyntheticParams, DEFAULT_WARMUP};
use crate::neat::NeatConfig;
use crate::trainer::{StageSchedule, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub output_dir: PathBuf,
    pub store: PathBuf,
    pub checkpoints: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            output_dir: PathBuf::from("out"),
            store: PathBuf::from("market.sqlite"),
            checkpoints: PathBuf::from("checkpoints"),
        }
    }
}

impl Paths {
    fn under_output(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.output_dir.join(p)
        }
    }

    pub fn store_path(&self) -> PathBuf {
        self.under_output(&self.store)
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.under_output(&self.checkpoints)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub runs: usize,
    pub window_days: u32,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            runs: 100,
            window_days: 365,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub seed: u64,
    pub warmup: usize,
    pub fitness: FitnessOption,
    pub schedule: StageSchedule,
    pub checkpoint_every: u32,
    pub per_genome_windows: bool,
    pub jobs: usize,
    pub paths: Paths,
    pub indicators: IndicatorConfig,
    pub neat: NeatConfig,
    pub broker: BrokerConfig,
    pub weights: FitnessWeights,
    pub selection: SelectionCriteria,
    pub evaluation: EvaluationConfig,
    pub synthetic: SyntheticParams,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        EngineConfig {
            seed: 42,
            warmup: DEFAULT_WARMUP,
            fitness: t.fitness,
            schedule: t.schedule,
            checkpoint_every: t.checkpoint_every,
            per_genome_windows: t.per_genome_windows,
            jobs: t.jobs,
            paths: Paths::default(),
            indicators: t.indicators,
            neat: t.neat,
            broker: t.broker,
            weights: t.weights,
            selection: SelectionCriteria::default(),
            evaluation: EvaluationConfig::default(),
            synthetic: SyntheticParams::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            neat: self.neat.clone(),
            indicators: self.indicators.clone(),
            broker: self.broker.clone(),
            schedule: self.schedule.clone(),
            fitness: self.fitness,
            weights: self.weights.clone(),
            warmup: self.warmup,
            checkpoint_every: self.checkpoint_every,
            per_genome_windows: self.per_genome_windows,
            jobs: self.jobs,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            indicators: self.indicators.clone(),
            broker: self.broker.clone(),
            warmup: self.warmup,
            jobs: self.jobs,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.train_config().validate().map_err(|e: TrainError| invalid(&e))?;
        self.selection.validate().map_err(|e| invalid(&e))?;
        if self.evaluation.runs == 0 || self.evaluation.window_days == 0 {
            return Err(ConfigError::Invalid("evaluation runs and window_days must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHIPPED: &str = include_str!("../../../config/default.toml");

    #[test]
    fn shipped_config_is_the_default() {
        let c = EngineConfig::from_toml_str(SHIPPED).unwrap();
        assert_eq!(c, EngineConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn empty_file_is_default_and_partial_overrides_apply() {
        assert_eq!(EngineConfig::from_toml_str("").unwrap(), EngineConfig::default());
        let c = EngineConfig::from_toml_str("seed = 7\nschedule = \"10:90\"\n[neat]\npopulation_size = 30\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.schedule.total_generations(), 10);
        assert_eq!(c.neat.population_size, 30);
        assert_eq!(c.neat.compatibility_threshold, NeatConfig::default().compatibility_threshold);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(EngineConfig::from_toml_str("sed = 1").is_err());
        assert!(EngineConfig::from_toml_str("schedule = \"10:x\"").is_err());
        assert!(EngineConfig::from_toml_str("fitness = \"best\"").is_err());
        let c = EngineConfig {
            warmup: 10,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn round_trip_and_paths() {
        let c = EngineConfig::default();
        assert_eq!(EngineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        assert_eq!(c.paths.store_path(), PathBuf::from("out/market.sqlite"));
        assert_eq!(c.paths.checkpoint_dir(), PathBuf::from("out/checkpoints"));
    }
}
