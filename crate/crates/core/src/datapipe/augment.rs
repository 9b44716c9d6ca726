use serde::{Deserialize, Serialize};

use crate::datapipe::spline::{resample_at, unit_knots};
use crate::datapipe::LandmarkSequence;
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::{COORDS, FEATURE_DIM};

/// Training-time augmentation strengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Temporal scale drawn from `[1 − jitter, 1 + jitter]`.
    pub jitter: f64,
    /// In-plane rotation drawn from `[−rotation_deg, +rotation_deg]`.
    pub rotation_deg: f64,
    pub noise_sigma: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            jitter: 0.05,
            rotation_deg: 15.0,
            noise_sigma: 0.01,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Parameter(format!("jitter {} must lie in [0, 1)", self.jitter)));
        }
        if !(0.0..=180.0).contains(&self.rotation_deg) {
            return Err(Error::Parameter(format!(
                "rotation_deg {} must lie in [0, 180]",
                self.rotation_deg
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Parameter(format!(
                "noise sigma {} must be ≥ 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Plays the sequence `scale` times faster: output frame `j` samples the
/// spline at `min(1, scale · j/(T−1))`, so the frame count is unchanged and
/// the fast end holds the last pose.
pub fn time_rescale(seq: &LandmarkSequence, scale: f64) -> Result<LandmarkSequence> {
    if !(scale > 0.0) {
        return Err(Error::Parameter(format!("time scale {scale} must be > 0")));
    }
    let times: Vec<f64> = unit_knots(seq.num_frames())
        .into_iter()
        .map(|u| (scale * u).min(1.0))
        .collect();
    resample_at(seq, &times)
}

pub fn augment_temporal_jitter(
    seq: &LandmarkSequence,
    rng: &mut Rng,
    jitter: f64,
) -> Result<LandmarkSequence> {
    let scale = rng.uniform_range(1.0 - jitter, 1.0 + jitter);
    time_rescale(seq, scale)
}

/// Rotates every landmark's `(x, y)` about the origin by `theta` radians.
pub fn rotate_by(seq: &LandmarkSequence, theta: f64) -> LandmarkSequence {
    let (sin, cos) = theta.sin_cos();
    let mut values = seq.values().to_vec();
    for point in values.chunks_exact_mut(COORDS) {
        let (x, y) = (point[0], point[1]);
        point[0] = cos * x - sin * y;
        point[1] = sin * x + cos * y;
    }
    seq.with_frames(values).expect("rotation keeps shape")
}

pub fn augment_rotate(seq: &LandmarkSequence, rng: &mut Rng, max_deg: f64) -> LandmarkSequence {
    let theta = rng.uniform_range(-max_deg, max_deg).to_radians();
    rotate_by(seq, theta)
}

/// Adds i.i.d. `Normal(0, sigma²)` to every coordinate.
pub fn augment_noise(seq: &LandmarkSequence, rng: &mut Rng, sigma: f64) -> Result<LandmarkSequence> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma {sigma} must be ≥ 0")));
    }
    if sigma == 0.0 {
        return Ok(seq.clone());
    }
    let values = seq.values().iter().map(|&v| v + sigma * rng.normal()).collect();
    seq.with_frames(values)
}

/// Jitter, then rotation, then noise, each from its own child stream of `rng`.
pub fn augment(seq: &LandmarkSequence, rng: &Rng, config: &AugmentConfig) -> Result<LandmarkSequence> {
    debug_assert_eq!(seq.values().len() % FEATURE_DIM, 0);
    let jittered = augment_temporal_jitter(seq, &mut rng.split("jitter"), config.jitter)?;
    let rotated = augment_rotate(&jittered, &mut rng.split("rotate"), config.rotation_deg);
    augment_noise(&rotated, &mut rng.split("noise"), config.noise_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_seq(rng: &mut Rng) -> LandmarkSequence {
        let v = (0..64 * FEATURE_DIM).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        LandmarkSequence::new("a", 0, "s", v).unwrap()
    }

    fn max_diff(a: &LandmarkSequence, b: &LandmarkSequence) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn unit_scale_is_identity() {
        let seq = random_seq(&mut Rng::new(1, "j"));
        assert!(max_diff(&time_rescale(&seq, 1.0).unwrap(), &seq) <= 1e-6);
        let mut rng = Rng::new(1, "j0");
        assert!(max_diff(&augment_temporal_jitter(&seq, &mut rng, 0.0).unwrap(), &seq) <= 1e-6);
    }

    #[test]
    fn constant_sequence_survives_jitter() {
        let seq = LandmarkSequence::new("c", 0, "s", vec![0.4; 64 * FEATURE_DIM]).unwrap();
        let mut rng = Rng::new(2, "jc");
        for _ in 0..5 {
            let out = augment_temporal_jitter(&seq, &mut rng, 0.05).unwrap();
            assert!(out.values().iter().all(|&v| (v - 0.4).abs() < 1e-12));
        }
    }

    #[test]
    fn faster_ramp_has_scaled_slope_until_clamped() {
        let v: Vec<f64> = (0..64 * FEATURE_DIM).map(|i| (i / FEATURE_DIM) as f64 / 63.0).collect();
        let seq = LandmarkSequence::new("r", 0, "s", v).unwrap();
        let out = time_rescale(&seq, 1.05).unwrap();
        assert_eq!(out.num_frames(), 64);
        for (j, frame) in out.frames().enumerate() {
            let u = j as f64 / 63.0;
            let want = (1.05 * u).min(1.0);
            assert!(frame.iter().all(|&x| (x - want).abs() <= 1e-6), "frame {j}");
        }
        // Slope ×1.05 over the unclamped part.
        let slope = (out.frame(60)[0] - out.frame(0)[0]) / (60.0 / 63.0);
        assert!((slope - 1.05).abs() <= 1e-6);

        let slow = time_rescale(&seq, 0.95).unwrap();
        for (j, frame) in slow.frames().enumerate() {
            assert!((frame[0] - 0.95 * j as f64 / 63.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn rotation_examples() {
        let seq = random_seq(&mut Rng::new(3, "rot"));
        assert_eq!(rotate_by(&seq, 0.0), seq);
        let mut v = vec![0.0; 2 * FEATURE_DIM];
        v[3] = 1.0;
        let p = LandmarkSequence::new("p", 0, "s", v).unwrap();
        let out = rotate_by(&p, std::f64::consts::FRAC_PI_2);
        assert!(out.frame(0)[3].abs() < 1e-15);
        assert!((out.frame(0)[4] - 1.0).abs() < 1e-15);
        assert_eq!(out.frame(0)[5], 0.0);
        let mut rng = Rng::new(3, "r0");
        assert_eq!(augment_rotate(&seq, &mut rng, 0.0), seq);
    }

    #[test]
    fn rotation_is_an_isometry() {
        let mut rng = Rng::new(4, "iso");
        let seq = random_seq(&mut rng);
        let out = augment_rotate(&seq, &mut rng, 15.0);
        let dist = |s: &LandmarkSequence, t: usize, a: usize, b: usize| {
            let f = s.frame(t);
            (0..3).map(|c| (f[a * 3 + c] - f[b * 3 + c]).powi(2)).sum::<f64>().sqrt()
        };
        for t in [0, 17, 63] {
            for a in 0..21 {
                for b in a + 1..21 {
                    assert!((dist(&seq, t, a, b) - dist(&out, t, a, b)).abs() <= 1e-6);
                }
            }
        }
        let z_same = seq.values().iter().zip(out.values()).enumerate().filter(|(i, _)| i % 3 == 2).all(|(_, (a, b))| a == b);
        assert!(z_same);
    }

    #[test]
    fn noise_examples() {
        let seq = random_seq(&mut Rng::new(5, "n"));
        assert_eq!(augment_noise(&seq, &mut Rng::new(5, "n0"), 0.0).unwrap(), seq);
        assert!(matches!(
            augment_noise(&seq, &mut Rng::new(5, "n0"), -0.1),
            Err(Error::Parameter(_))
        ));
        let a = augment_noise(&seq, &mut Rng::new(9, "fixed"), 0.01).unwrap();
        let b = augment_noise(&seq, &mut Rng::new(9, "fixed"), 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_has_requested_spread() {
        let base = LandmarkSequence::new("z", 0, "s", vec![0.0; 1588 * FEATURE_DIM]).unwrap();
        let out = augment_noise(&base, &mut Rng::new(42, "noise"), 0.01).unwrap();
        let n = out.values().len() as f64;
        assert!(n >= 1e5);
        let mean = out.values().iter().sum::<f64>() / n;
        let std = (out.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((0.0095..=0.0105).contains(&std), "{std}");
    }

    #[test]
    fn identity_draws_make_augment_an_identity() {
        let seq = random_seq(&mut Rng::new(6, "id"));
        let cfg = AugmentConfig { jitter: 0.0, rotation_deg: 0.0, noise_sigma: 0.0 };
        let out = augment(&seq, &Rng::new(6, "aug"), &cfg).unwrap();
        assert!(max_diff(&out, &seq) <= 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        assert!(AugmentConfig { noise_sigma: -1.0, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { jitter: 1.5, ..Default::default() }.validate().is_err());
    }
}
