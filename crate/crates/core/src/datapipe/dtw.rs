//! Banded dynamic time warping, medoid templates and template alignment.

use crate::datapipe::LandmarkSequence;
use crate::error::{Error, Result};
use crate::FEATURE_DIM;

/// Monotone warping path from `(0, 0)` to `(n−1, m−1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WarpPath {
    pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True when the path starts at the origin, ends at `(n−1, m−1)` and
    /// every step advances `i`, `j` or both by exactly one.
    pub fn is_valid(&self, n: usize, m: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.pairs.first(), self.pairs.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (n - 1, m - 1)
            && self.pairs.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    pub fn is_diagonal(&self) -> bool {
        self.pairs.iter().all(|&(i, j)| i == j)
    }
}

/// Band half-width actually used for lengths `n` and `m`: `max(width, |n − m|)`,
/// which keeps the corner `(n−1, m−1)` reachable.
pub fn effective_band(n: usize, m: usize, width: usize) -> usize {
    width.max(n.abs_diff(m))
}

/// Cell `(i, j)` lies within `w` of the straight line joining the corners,
/// measured along the longer sequence's axis. For `n ≥ m` this is
/// `|i − j·(n−1)/(m−1)| ≤ w`; the longer-axis measure keeps the band
/// symmetric in its arguments.
fn in_band(i: usize, j: usize, n: usize, m: usize, w: usize) -> bool {
    let lhs = (i as i64 * (m as i64 - 1) - j as i64 * (n as i64 - 1)).abs();
    lhs <= w as i64 * (n.min(m) as i64 - 1)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// DTW distance with Euclidean local cost under a Sakoe-Chiba band, plus
/// an optimal warping path.
pub fn dtw_banded<F: AsRef<[f64]>>(a: &[F], b: &[F], width: usize) -> Result<(f64, WarpPath)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Parameter("dtw needs non-empty sequences".into()));
    }
    let dim = a[0].as_ref().len();
    if a.iter().chain(b).any(|f| f.as_ref().len() != dim) {
        return Err(Error::Dimension("dtw frames differ in dimension".into()));
    }
    let w = effective_band(n, m, width);
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            if !in_band(i, j, n, m, w) {
                continue;
            }
            let cost = euclidean(a[i].as_ref(), b[j].as_ref());
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = if i == 0 && j == 0 { cost } else { best + cost };
        }
    }
    let distance = acc[n * m - 1];
    debug_assert!(distance.is_finite(), "band must admit a path");

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let mut step = (usize::MAX, usize::MAX);
        let mut best = f64::INFINITY;
        // Preference on ties: diagonal, then advance in `a`, then in `b`.
        for (pi, pj) in [(i.wrapping_sub(1), j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1))] {
            if pi < n && pj < m && acc[pi * m + pj] < best {
                best = acc[pi * m + pj];
                step = (pi, pj);
            }
        }
        (i, j) = step;
        pairs.push(step);
    }
    pairs.reverse();
    Ok((distance, WarpPath { pairs }))
}

fn frame_slices(seq: &LandmarkSequence) -> Vec<&[f64]> {
    seq.frames().collect()
}

/// Index of the member with the smallest summed DTW distance to all other
/// members; exact ties go to the lexicographically smallest sample id.
pub fn class_medoid(samples: &[LandmarkSequence], width: usize) -> Result<usize> {
    let Some(first) = samples.first() else {
        return Err(Error::Parameter("class_medoid needs at least one sample".into()));
    };
    if samples.iter().any(|s| s.label() != first.label()) {
        return Err(Error::Parameter("class_medoid samples must share a label".into()));
    }
    let frames: Vec<Vec<&[f64]>> = samples.iter().map(frame_slices).collect();
    let n = samples.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dtw_banded(&frames[i], &frames[j], width)?.0;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut best = 0usize;
    let mut best_sum = f64::INFINITY;
    for i in 0..n {
        let sum: f64 = dist[i * n..(i + 1) * n].iter().sum();
        if sum < best_sum || (sum == best_sum && samples[i].id() < samples[best].id()) {
            best = i;
            best_sum = sum;
        }
    }
    Ok(best)
}

/// Re-times `seq` onto the template's frame count: output frame `j` is the
/// mean of every `seq` frame the optimal path maps onto template frame `j`.
pub fn align_to_template(
    seq: &LandmarkSequence,
    template: &LandmarkSequence,
    width: usize,
) -> Result<LandmarkSequence> {
    let (_, path) = dtw_banded(&frame_slices(seq), &frame_slices(template), width)?;
    let m = template.num_frames();
    let mut sums = vec![0.0f64; m * FEATURE_DIM];
    let mut counts = vec![0usize; m];
    for &(i, j) in path.pairs() {
        counts[j] += 1;
        for (s, &v) in sums[j * FEATURE_DIM..(j + 1) * FEATURE_DIM].iter_mut().zip(seq.frame(i)) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        let c = c as f64;
        sums[j * FEATURE_DIM..(j + 1) * FEATURE_DIM].iter_mut().for_each(|s| *s /= c);
    }
    seq.with_frames(sums)
}
