use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datapipe::{augment, AugmentConfig, LandmarkSequence};
use crate::error::{Error, Result};
use crate::evaluation::{predict, stack_batch, top_k_accuracy};
use crate::models::{backward, forward_with_tape, init_params, ModelConfig, ModelParams};
use crate::numerics::{ensure_finite, Rng};
use crate::training::{
    adamw_step, clip_global_norm, curriculum_length, label_smoothed_loss, scheduled_lr, subsample_indices,
    EarlyStopState, OptimizerState, TrainConfig,
};
use crate::STANDARD_FRAMES;

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate at the start of the epoch.
    pub lr: f64,
    pub curriculum_frames: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top1: f64,
    pub val_top5: f64,
}

pub const LOG_HEADER: &str = "epoch,lr,curriculum_frames,train_loss,val_loss,val_top1,val_top5";

/// Renders the log as CSV with a header row.
pub fn log_to_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.epoch, r.lr, r.curriculum_frames, r.train_loss, r.val_loss, r.val_top1, r.val_top5
        );
    }
    s
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams<f32>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Label-smoothed loss and Top-1/Top-k of standardized samples.
pub fn validation_metrics(
    params: &ModelParams<f32>,
    samples: &[LandmarkSequence],
    batch_size: usize,
    smoothing: f64,
) -> Result<(f64, f64, f64)> {
    let logits = predict(params, samples, batch_size)?;
    let truths: Vec<usize> = samples.iter().map(LandmarkSequence::label).collect();
    let (loss, _) = label_smoothed_loss(logits.tensor(), &truths, smoothing)?;
    let k5 = 5.min(logits.classes());
    Ok((loss, top_k_accuracy(&logits, &truths, 1)?, top_k_accuracy(&logits, &truths, k5)?))
}

fn check_split(train: &[LandmarkSequence], val: &[LandmarkSequence]) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Protocol("training and validation sets must both be non-empty".into()));
    }
    let train_signers: BTreeSet<&str> = train.iter().map(LandmarkSequence::signer).collect();
    if let Some(s) = val.iter().map(LandmarkSequence::signer).find(|s| train_signers.contains(s)) {
        return Err(Error::Protocol(format!("signer {s} appears in both training and validation sets")));
    }
    for s in train.iter().chain(val) {
        if s.num_frames() != STANDARD_FRAMES {
            return Err(Error::Dimension(format!(
                "sample {} has {} frames; standardize to {STANDARD_FRAMES} first",
                s.id(),
                s.num_frames()
            )));
        }
    }
    Ok(())
}

/// Trains a fresh model on standardized, signer-disjoint train/validation
/// sets and returns the minimum-validation-loss parameters with the log.
///
/// Every random draw comes from a child stream of `rng` keyed by purpose,
/// epoch and (for augmentation) sample id, so runs are reproducible bit for
/// bit. In `checked` mode gradients and parameters are verified finite after
/// every step.
pub fn fit(
    model: &ModelConfig,
    train: &[LandmarkSequence],
    val: &[LandmarkSequence],
    config: &TrainConfig,
    augmentation: &AugmentConfig,
    rng: &Rng,
    checked: bool,
) -> Result<FitOutcome> {
    config.validate()?;
    augmentation.validate()?;
    check_split(train, val)?;
    let model = ModelConfig {
        dropout: config.dropout,
        ..model.clone()
    };
    model.validate()?;

    let mut params: ModelParams<f32> = init_params(&model, &rng.split("init"))?;
    let mut state = OptimizerState::new(params.tensors());
    let mut stopper = EarlyStopState::new(config.patience);
    let mut best = params.clone();
    let mut log = Vec::new();
    let mut stopped_early = false;
    let batches = train.len().div_ceil(config.batch_size);

    for epoch in 0..config.epochs {
        let frames = curriculum_length(config, epoch);
        let indices = subsample_indices(STANDARD_FRAMES, frames);
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.split(&format!("shuffle/{epoch}")).shuffle(&mut order);

        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let augmented = chunk
                .iter()
                .map(|&i| augment(&train[i], &rng.split(&format!("augment/{epoch}/{}", train[i].id())), augmentation))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&LandmarkSequence> = augmented.iter().collect();
            let batch = stack_batch(&refs, Some(&indices))?;
            let targets: Vec<usize> = augmented.iter().map(LandmarkSequence::label).collect();

            let mut dropout_rng = rng.split(&format!("dropout/{epoch}/{b}"));
            let (logits, tape) = forward_with_tape(&params, &batch, true, &mut dropout_rng)?;
            let (loss, d_logits) = label_smoothed_loss(logits.tensor(), &targets, config.label_smoothing)?;
            let mut grads = backward(&params, &tape, &d_logits)?;
            if checked {
                for (name, g) in params.names().iter().zip(&grads) {
                    ensure_finite(&format!("gradient of {name}"), g.data())?;
                }
            }
            clip_global_norm(&mut grads, config.clip_norm);
            let lr = scheduled_lr(config, epoch, b as f64 / batches as f64);
            adamw_step(params.tensors_mut(), &grads, &mut state, lr, config.weight_decay)?;
            if checked {
                for (name, p) in params.iter() {
                    ensure_finite(&format!("parameter {name} at epoch {epoch} step {b}"), p.data())?;
                }
            }
            loss_sum += loss * chunk.len() as f64;
        }

        let (val_loss, val_top1, val_top5) = validation_metrics(&params, val, config.batch_size, config.label_smoothing)?;
        log.push(EpochRecord {
            epoch,
            lr: scheduled_lr(config, epoch, 0.0),
            curriculum_frames: frames,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_top1,
            val_top5,
        });
        if stopper.update(epoch, val_loss) {
            best = params.clone();
        }
        if stopper.should_stop() {
            stopped_early = epoch + 1 < config.epochs;
            break;
        }
    }

    Ok(FitOutcome {
        params: best,
        best_epoch: stopper.best_epoch.unwrap_or(0),
        best_val_loss: stopper.best_loss,
        log,
        stopped_early,
    })
}
