use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::STANDARD_FRAMES;

/// Optimization protocol shared by both architectures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_base: f64,
    pub lr_max: f64,
    pub cycle_epochs: usize,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub label_smoothing: f64,
    /// Dropout probability; overrides the model's own setting during training.
    pub dropout: f64,
    pub patience: usize,
    /// Epochs at which the curriculum moves to the next length.
    pub curriculum_epochs: Vec<usize>,
    pub curriculum_lengths: Vec<usize>,
    pub seed: u64,
    /// Independent runs per fold; run `r` uses seed `seed + r`.
    pub runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            lr_base: 1e-4,
            lr_max: 3e-3,
            cycle_epochs: 10,
            weight_decay: 1e-5,
            clip_norm: 1.0,
            label_smoothing: 0.1,
            dropout: 0.3,
            patience: 10,
            curriculum_epochs: vec![10, 25, 40],
            curriculum_lengths: vec![16, 32, 48, 64],
            seed: 42,
            runs: 3,
        }
    }
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("cycle_epochs", self.cycle_epochs),
            ("patience", self.patience),
            ("runs", self.runs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Parameter(format!("train.{name} must be positive")));
            }
        }
        if !(self.lr_base > 0.0 && self.lr_base < self.lr_max && self.lr_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "train.lr_base {} and train.lr_max {} must satisfy 0 < lr_base < lr_max",
                self.lr_base, self.lr_max
            )));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Parameter(format!(
                "train.label_smoothing {} must lie in [0, 1)",
                self.label_smoothing
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!("train.dropout {} must lie in [0, 1)", self.dropout)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Parameter(format!("train.weight_decay {} must be ≥ 0", self.weight_decay)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Parameter(format!("train.clip_norm {} must be > 0", self.clip_norm)));
        }
        if self.curriculum_lengths.len() != self.curriculum_epochs.len() + 1 {
            return Err(Error::Parameter(
                "train.curriculum_lengths needs exactly one more entry than train.curriculum_epochs".into(),
            ));
        }
        if !strictly_increasing(&self.curriculum_epochs) || self.curriculum_epochs.first() == Some(&0) {
            return Err(Error::Parameter(
                "train.curriculum_epochs must be positive and strictly increasing".into(),
            ));
        }
        if !strictly_increasing(&self.curriculum_lengths)
            || self.curriculum_lengths.last() != Some(&STANDARD_FRAMES)
            || self.curriculum_lengths[0] < 2
        {
            return Err(Error::Parameter(format!(
                "train.curriculum_lengths must be strictly increasing, at least 2, and end at {STANDARD_FRAMES}"
            )));
        }
        Ok(())
    }

    /// Seed of run `r` (0-based).
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed + run as u64
    }
}
