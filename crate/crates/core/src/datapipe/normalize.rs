use crate::datapipe::LandmarkSequence;
use crate::{COORDS, FEATURE_DIM, LANDMARKS};

/// Added to the per-feature standard deviation before dividing.
pub const ZSCORE_EPS: f64 = 1e-8;

/// Subtracts landmark 0 (the wrist) from every landmark, frame by frame.
pub fn wrist_center(seq: &LandmarkSequence) -> LandmarkSequence {
    let mut values = seq.values().to_vec();
    for frame in values.chunks_exact_mut(FEATURE_DIM) {
        let wrist = [frame[0], frame[1], frame[2]];
        for l in 0..LANDMARKS {
            for c in 0..COORDS {
                frame[l * COORDS + c] -= wrist[c];
            }
        }
    }
    seq.with_frames(values).expect("same frame count")
}

/// Per-feature standardization over the sample's own frames:
/// `(x − mean) / (std + 1e-8)` with the population standard deviation.
pub fn zscore(seq: &LandmarkSequence) -> LandmarkSequence {
    let t = seq.num_frames() as f64;
    let mut mean = [0.0f64; FEATURE_DIM];
    for frame in seq.frames() {
        for (m, &v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t);
    let mut var = [0.0f64; FEATURE_DIM];
    for frame in seq.frames() {
        for f in 0..FEATURE_DIM {
            var[f] += (frame[f] - mean[f]).powi(2);
        }
    }
    let denom: Vec<f64> = var.iter().map(|v| (v / t).sqrt() + ZSCORE_EPS).collect();
    let mut values = seq.values().to_vec();
    for frame in values.chunks_exact_mut(FEATURE_DIM) {
        for f in 0..FEATURE_DIM {
            frame[f] = (frame[f] - mean[f]) / denom[f];
        }
    }
    seq.with_frames(values).expect("same frame count")
}
