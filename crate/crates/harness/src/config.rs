use std::fs;
use std::path::{Path, PathBuf};

use purl_core::agent::AgentConfig;
use purl_core::data::SyntheticSpec;
use purl_core::driver::{DriverConfig, ModelConfig};
use purl_core::env::EnvConfig;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// Where the train/test splits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Generate in memory.
    Synthetic(SyntheticSpec),
    /// A directory written by `purl gen-data`.
    Dir(PathBuf),
    Idx(IdxPaths),
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic(SyntheticSpec::default())
    }
}

/// Complete run configuration. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub driver: DriverConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.driver.validate()?;
        if let DataConfig::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        if self.model.hidden_sizes.contains(&0) {
            return Err(config("model hidden sizes must be nonzero"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_fail_fast() {
        for bad in [
            r#"{"envv": {}}"#,
            r#"{"env": {"beta": 5, "gama": 0.9}}"#,
            r#"{"agent": {"gama": 0.9}}"#,
            r#"{"driver": {"episodes": 3}}"#,
            r#"{"data": {"synthetic": {"clases": 3}}}"#,
        ] {
            let err = ExperimentConfig::from_json(bad).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"env": {"reward_mode": "sparse"}, "driver": {"max_episodes": 7}}"#)
            .unwrap();
        assert_eq!(cfg.driver.max_episodes, 7);
        assert_eq!(cfg.env.beta, 5.0);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = ExperimentConfig::from_json(r#"{"agent": {"replay_capacity": 4, "batch_size": 8}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
