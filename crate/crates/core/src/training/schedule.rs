use crate::training::TrainConfig;

/// Cosine decay from `lr_max` at `x = 0` to `lr_base` at `x = 1`.
pub fn cyclical_cosine_lr(x: f64, lr_base: f64, lr_max: f64) -> f64 {
    lr_base + 0.5 * (lr_max - lr_base) * (1.0 + (std::f64::consts::PI * x).cos())
}

/// Learning rate at `fraction ∈ [0, 1]` of the way through `epoch`. Cycles
/// last `cycle_epochs` and restart at `lr_max`.
pub fn scheduled_lr(config: &TrainConfig, epoch: usize, fraction: f64) -> f64 {
    let c = config.cycle_epochs;
    let x = ((epoch % c) as f64 + fraction) / c as f64;
    cyclical_cosine_lr(x, config.lr_base, config.lr_max)
}

/// Input length for `epoch` (0-based).
pub fn curriculum_length(config: &TrainConfig, epoch: usize) -> usize {
    let stage = config.curriculum_epochs.iter().filter(|&&e| epoch >= e).count();
    config.curriculum_lengths[stage]
}

/// Frame indices into a `source`-frame sequence that yield `length` frames:
/// a uniform stride when it divides evenly, otherwise `floor(k·(source−1)/(length−1))`.
pub fn subsample_indices(source: usize, length: usize) -> Vec<usize> {
    assert!(length >= 1 && length <= source, "cannot take {length} frames from {source}");
    if source.is_multiple_of(length) {
        let stride = source / length;
        (0..length).map(|k| k * stride).collect()
    } else {
        (0..length).map(|k| k * (source - 1) / (length - 1)).collect()
    }
}
