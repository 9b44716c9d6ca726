//! Experiment configuration: one TOML file with `[data]`, `[augment]`,
//! `[model]`, `[train]` and `[run]` sections. Every key is optional and
//! defaults to the full-scale protocol; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slr_core::datapipe::{AugmentConfig, DTW_WIDTH};
use slr_core::models::ModelConfig;
use slr_core::training::TrainConfig;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding `manifest.json`; relative paths resolve against the
    /// config file's directory.
    pub root: PathBuf,
    /// Dataset label used in reports.
    pub name: String,
    pub dtw_width: usize,
    pub folds: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("data"),
            name: "dataset".into(),
            dtw_width: DTW_WIDTH,
            folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output: PathBuf,
    /// Verify gradients and parameters are finite after every step.
    pub checked: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("runs"),
            checked: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub run: RunConfig,
}

fn field_error(e: slr_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parses and validates a config file, resolving relative paths against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.data.root.is_relative() {
            cfg.data.root = base.join(&cfg.data.root);
        }
        if cfg.run.output.is_relative() {
            cfg.run.output = base.join(&cfg.run.output);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.augment.validate().map_err(field_error)?;
        self.model.validate().map_err(field_error)?;
        self.train.validate().map_err(field_error)?;
        if self.data.folds < 2 {
            return Err(CliError::Config(format!("data.folds {} must be at least 2", self.data.folds)));
        }
        if self.data.name.is_empty() || self.data.name.contains(',') {
            return Err(CliError::Config("data.name must be non-empty and contain no commas".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seeds of the independent runs.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.train.runs).map(|r| self.train.run_seed(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_full_scale_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.model.conv_filters, 128);
        assert_eq!(cfg.model.lstm_units, 256);
        assert_eq!((cfg.model.layers, cfg.model.heads, cfg.model.model_dim), (6, 8, 512));
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.train.seed, 42);
        assert_eq!(cfg.data.dtw_width, 10);
        assert_eq!(cfg.run_seeds(), vec![42, 43, 44]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[train]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
        assert!(ExperimentConfig::from_toml("[optimizer]\n").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = ExperimentConfig::from_toml("[model]\nmodel_dim = 30\nheads = 4\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.category(), "config");
        assert!(err.to_string().contains("model.model_dim"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml("[data]\nname = \"synth\"\n[train]\nepochs = 7\n").unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
