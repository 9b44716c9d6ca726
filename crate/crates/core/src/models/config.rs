use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Per-frame 3×3 convolution feeding a single LSTM layer.
    ConvLstm,
    /// Post-norm self-attention encoder with mean pooling.
    Transformer,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::ConvLstm, ModelKind::Transformer];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ConvLstm => "convlstm",
            ModelKind::Transformer => "transformer",
        }
    }

    /// Row label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::ConvLstm => "ConvLSTM",
            ModelKind::Transformer => "Vanilla Transformer",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "convlstm" => Ok(ModelKind::ConvLstm),
            "transformer" => Ok(ModelKind::Transformer),
            other => Err(Error::Parameter(format!(
                "unknown model kind `{other}` (expected convlstm or transformer)"
            ))),
        }
    }
}

/// Hyperparameters for both architectures. Only the fields relevant to
/// `kind` shape the parameters, so switching `kind` is the single change
/// between the two arms of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub num_classes: usize,
    pub conv_filters: usize,
    pub lstm_units: usize,
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub positional_encoding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::ConvLstm,
            num_classes: 100,
            conv_filters: 128,
            lstm_units: 256,
            layers: 6,
            heads: 8,
            model_dim: 512,
            ffn_dim: 2048,
            dropout: 0.3,
            positional_encoding: true,
        }
    }
}

impl ModelConfig {
    pub fn with_kind(&self, kind: ModelKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("num_classes", self.num_classes),
            ("conv_filters", self.conv_filters),
            ("lstm_units", self.lstm_units),
            ("layers", self.layers),
            ("heads", self.heads),
            ("model_dim", self.model_dim),
            ("ffn_dim", self.ffn_dim),
        ];
        for (name, v) in extents {
            if v == 0 {
                return Err(Error::Parameter(format!("model.{name} must be positive")));
            }
        }
        if self.num_classes < 2 {
            return Err(Error::Parameter("model.num_classes must be at least 2".into()));
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return Err(Error::Parameter(format!(
                "model.model_dim {} is not divisible by model.heads {}",
                self.model_dim, self.heads
            )));
        }
        if !self.model_dim.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "model.model_dim {} must be even for sinusoidal positions",
                self.model_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!(
                "model.dropout {} must lie in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!((c.conv_filters, c.lstm_units), (128, 256));
        assert_eq!((c.layers, c.heads, c.model_dim), (6, 8, 512));
    }

    #[test]
    fn invalid_configs() {
        let c = ModelConfig { heads: 7, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { layers: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { dropout: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ConvLSTM".parse::<ModelKind>().unwrap(), ModelKind::ConvLstm);
        assert_eq!("transformer".parse::<ModelKind>().unwrap(), ModelKind::Transformer);
        assert!("rnn".parse::<ModelKind>().is_err());
        assert_eq!(serde_json::to_string(&ModelKind::ConvLstm).unwrap(), "\"convlstm\"");
    }
}
