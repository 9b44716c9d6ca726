use crate::datapipe::LandmarkSequence;
use crate::error::{Error, Result};
use crate::FEATURE_DIM;

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Clone, Debug)]
pub struct NaturalCubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    /// `knots` strictly increasing, at least two of them.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::Parameter(format!(
                "spline needs ≥ 2 knots with one value each, got {n} knots and {} values",
                values.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("spline knots must be strictly increasing".into()));
        }
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for k in 1..n - 1 {
                let h0 = knots[k] - knots[k - 1];
                let h1 = knots[k + 1] - knots[k];
                diag[k - 1] = 2.0 * (h0 + h1);
                upper[k - 1] = h1;
                rhs[k - 1] = 6.0 * ((values[k + 1] - values[k]) / h1 - (values[k] - values[k - 1]) / h0);
            }
            for r in 1..m {
                let lower = knots[r + 1] - knots[r];
                let factor = lower / diag[r - 1];
                diag[r] -= factor * upper[r - 1];
                rhs[r] -= factor * rhs[r - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for r in (0..m - 1).rev() {
                second[r + 1] = (rhs[r] - upper[r] * second[r + 2]) / diag[r];
            }
        }
        Ok(Self { knots, values, second })
    }

    /// Evaluates at `x`, clamped to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let x = x.clamp(self.knots[0], self.knots[n - 1]);
        let k = self.knots.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.knots[k], self.knots[k + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        let (m0, m1) = (self.second[k], self.second[k + 1]);
        m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (self.values[k] / h - m0 * h / 6.0) * a
            + (self.values[k + 1] / h - m1 * h / 6.0) * b
    }
}

/// Uniform knots `k/(n−1)` on `[0, 1]`.
pub(crate) fn unit_knots(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// Fits every feature column of `seq` with a natural spline over
/// normalized time and evaluates it at the points produced by `times`.
pub(crate) fn resample_at(seq: &LandmarkSequence, times: &[f64]) -> Result<LandmarkSequence> {
    let knots = unit_knots(seq.num_frames());
    let mut out = vec![0.0; times.len() * FEATURE_DIM];
    for f in 0..FEATURE_DIM {
        let column: Vec<f64> = seq.frames().map(|fr| fr[f]).collect();
        let spline = NaturalCubicSpline::new(knots.clone(), column)?;
        for (j, &t) in times.iter().enumerate() {
            out[j * FEATURE_DIM + f] = spline.eval(t);
        }
    }
    seq.with_frames(out)
}

/// Resamples to `target` uniformly spaced frames with per-feature natural
/// cubic splines over `t ∈ [0, 1]`.
pub fn resample_cubic(seq: &LandmarkSequence, target: usize) -> Result<LandmarkSequence> {
    if target < 2 {
        return Err(Error::Parameter(format!("resample target {target} must be ≥ 2")));
    }
    resample_at(seq, &unit_knots(target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn from_fn(frames: usize, mut f: impl FnMut(f64, usize) -> f64) -> LandmarkSequence {
        let mut v = vec![0.0; frames * FEATURE_DIM];
        for t in 0..frames {
            let x = t as f64 / (frames - 1) as f64;
            for c in 0..FEATURE_DIM {
                v[t * FEATURE_DIM + c] = f(x, c);
            }
        }
        LandmarkSequence::new("s", 0, "x", v).unwrap()
    }

    #[test]
    fn same_length_is_identity() {
        let mut rng = Rng::new(1, "spline");
        let seq = from_fn(64, |_, _| rng.uniform_range(-3.0, 3.0));
        let out = resample_cubic(&seq, 64).unwrap();
        let err = out.values().iter().zip(seq.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn sine_is_accurate() {
        let seq = from_fn(32, |t, _| (2.0 * PI * t).sin());
        let out = resample_cubic(&seq, 64).unwrap();
        assert_eq!(out.num_frames(), 64);
        let mut worst = 0.0f64;
        for (j, frame) in out.frames().enumerate() {
            let t = j as f64 / 63.0;
            worst = worst.max((frame[0] - (2.0 * PI * t).sin()).abs());
        }
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn two_knots_interpolate_linearly() {
        let s = NaturalCubicSpline::new(vec![0.0, 1.0], vec![2.0, 4.0]).unwrap();
        assert!((s.eval(0.25) - 2.5).abs() < 1e-15);
        assert_eq!(s.eval(2.0), 4.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(NaturalCubicSpline::new(vec![0.0], vec![1.0]).is_err());
        assert!(NaturalCubicSpline::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        let seq = from_fn(4, |t, _| t);
        assert!(resample_cubic(&seq, 1).is_err());
    }

    #[test]
    fn matches_known_spline_values() {
        // y = x³ on knots 0,1,2,3: natural second derivatives solve
        // 4·M1 + M2 = 36, M1 + 4·M2 = 72 → M1 = 4.8, M2 = 16.8.
        let s = NaturalCubicSpline::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 8.0, 27.0]).unwrap();
        assert!((s.second[1] - 4.8).abs() < 1e-12);
        assert!((s.second[2] - 16.8).abs() < 1e-12);
        let want = 4.8 / 6.0 * 0.125 + (0.0 - 0.0) * 0.5 + (1.0 - 4.8 / 6.0) * 0.5;
        assert!((s.eval(0.5) - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn affine_in_time_is_exact(frames in 2usize..120, target in 2usize..130, slope in -5.0f64..5.0, icpt in -5.0f64..5.0) {
            let seq = from_fn(frames, |t, c| slope * t * (c as f64 + 1.0) / 10.0 + icpt);
            let out = resample_cubic(&seq, target).unwrap();
            prop_assert_eq!(out.num_frames(), target);
            for (j, frame) in out.frames().enumerate() {
                let t = j as f64 / (target - 1) as f64;
                for c in 0..FEATURE_DIM {
                    let want = slope * t * (c as f64 + 1.0) / 10.0 + icpt;
                    prop_assert!((frame[c] - want).abs() <= 1e-9);
                }
            }
        }
    }
}
