//! Optimization protocol: label-smoothed loss, AdamW, global-norm clipping,
//! a restarting cosine schedule, a frame-count curriculum and early stopping,
//! tied together by [`fit`].

mod config;
mod early_stop;
mod fit;
mod loss;
mod optim;
mod schedule;

pub use config::TrainConfig;
pub use early_stop::EarlyStopState;
pub use fit::{fit, log_to_csv, validation_metrics, EpochRecord, FitOutcome, LOG_HEADER};
pub use loss::label_smoothed_loss;
pub use optim::{adamw_step, clip_global_norm, global_norm, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use schedule::{curriculum_length, cyclical_cosine_lr, scheduled_lr, subsample_indices};
