//! The two sequence classifiers. Both map a batch `[B × T × 63]` to logits
//! `[B × num_classes]`; backward passes are written out per layer.

mod checkpoint;
mod config;
mod convlstm;
mod layers;
mod params;
mod transformer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, SLRC_MAGIC, SLRC_VERSION};
pub use config::{ModelConfig, ModelKind};
pub use convlstm::{convlstm_forward, lstm_cell, LstmWeights};
pub use layers::{multi_head_attention, positional_encoding, AttentionOutput, AttentionWeights};
pub use params::{glorot_bound, init_params, param_specs, shape_manifest, Init, ModelParams, ParamSpec};
pub use transformer::transformer_forward;

use crate::error::{Error, Result};
use crate::numerics::{Real, Rng, Tensor};
use crate::FEATURE_DIM;

/// Unnormalized class scores, `[batch × classes]`, always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits<T = f32>(Tensor<T>);

impl<T: Real> Logits<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        if t.rank() != 2 {
            return Err(Error::Dimension(format!("logits must be 2-D, got {:?}", t.shape())));
        }
        if !t.is_finite() {
            return Err(Error::Data("logits contain non-finite values".into()));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.0
    }

    pub fn batch(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn classes(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let k = self.classes();
        &self.0.data()[i * k..(i + 1) * k]
    }
}

/// Activations recorded by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub enum Tape<T> {
    ConvLstm(convlstm::ConvLstmTape<T>),
    Transformer(transformer::TransformerTape<T>),
}

/// Returns `(batch, frames)` for a `[B × T × 63]` input.
pub(crate) fn batch_dims<T: Real>(batch: &Tensor<T>) -> Result<(usize, usize)> {
    match *batch.shape() {
        [b, t, FEATURE_DIM] => Ok((b, t)),
        ref s => Err(Error::Dimension(format!("model input must be B×T×{FEATURE_DIM}, got {s:?}"))),
    }
}

/// Forward pass for whichever architecture `params` describes.
pub fn forward<T: Real>(params: &ModelParams<T>, batch: &Tensor<T>, training: bool, rng: &mut Rng) -> Result<Logits<T>> {
    forward_with_tape(params, batch, training, rng).map(|(logits, _)| logits)
}

/// Forward pass that also records what [`backward`] needs.
pub fn forward_with_tape<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut Rng,
) -> Result<(Logits<T>, Tape<T>)> {
    let (logits, tape) = match params.kind() {
        ModelKind::ConvLstm => {
            let (l, t) = convlstm::forward(params, batch, training, rng)?;
            (l, Tape::ConvLstm(t))
        }
        ModelKind::Transformer => {
            let (l, t) = transformer::forward(params, batch, training, rng)?;
            (l, Tape::Transformer(t))
        }
    };
    Ok((Logits::new(logits)?, tape))
}

/// Gradients of `Σ d_logits ⊙ logits` with respect to every parameter, in
/// the order of [`ModelParams::tensors`].
pub fn backward<T: Real>(params: &ModelParams<T>, tape: &Tape<T>, d_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    match (params.kind(), tape) {
        (ModelKind::ConvLstm, Tape::ConvLstm(t)) => convlstm::backward(params, t, d_logits),
        (ModelKind::Transformer, Tape::Transformer(t)) => transformer::backward(params, t, d_logits),
        (kind, _) => Err(Error::Parameter(format!("tape does not belong to a {kind} model"))),
    }
}
