//! Landmark ingestion, preprocessing, augmentation and synthetic data.
//!
//! The preprocessing order is fixed: [`wrist_center`] → [`zscore`] →
//! (training only) [`align_to_template`] against the class medoid →
//! [`resample_cubic`] to 64 frames → (training only) augmentations.

mod augment;
mod dtw;
mod manifest;
mod normalize;
mod pipeline;
mod sequence;
mod spline;
mod synth;

pub use augment::{
    augment, augment_noise, augment_rotate, augment_temporal_jitter, rotate_by, time_rescale,
    AugmentConfig,
};
pub use dtw::{align_to_template, class_medoid, dtw_banded, effective_band, WarpPath};
pub use manifest::{DatasetManifest, SampleEntry};
pub use normalize::{wrist_center, zscore, ZSCORE_EPS};
pub use pipeline::{normalize, standardize_for_inference, standardize_for_training, DTW_WIDTH};
pub use sequence::{decode_slrb, encode_slrb, load_sequence, save_sequence, LandmarkSequence, SLRB_MAGIC, SLRB_VERSION};
pub use spline::{resample_cubic, NaturalCubicSpline};
pub use synth::{synth_generate, SynthConfig, SyntheticDataset};
