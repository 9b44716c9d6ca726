//! Shared building blocks: affine maps, sinusoidal positions and
//! multi-head scaled dot-product attention, each with its backward pass.

use crate::error::{Error, Result};
use crate::numerics::{
    add_bias_rows, col_sums_into, matmul_a_bt_into, matmul_at_b_into, matmul_into, softmax_in_place, Real,
    Tensor,
};

/// `x[rows × in] · w[in × out] + b`.
pub(crate) fn linear<T: Real>(x: &[T], rows: usize, w: &Tensor<T>, b: &Tensor<T>) -> Vec<T> {
    let (din, dout) = (w.shape()[0], w.shape()[1]);
    let mut out = vec![T::zero(); rows * dout];
    matmul_into(x, w.data(), rows, din, dout, &mut out, false);
    add_bias_rows(&mut out, b.data());
    out
}

/// Accumulates weight and bias gradients of [`linear`]; returns the input
/// gradient when `want_dx` is set.
pub(crate) fn linear_backward<T: Real>(
    x: &[T],
    rows: usize,
    w: &Tensor<T>,
    dy: &[T],
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
    want_dx: bool,
) -> Option<Vec<T>> {
    let (din, dout) = (w.shape()[0], w.shape()[1]);
    matmul_at_b_into(x, dy, rows, din, dout, dw.data_mut());
    col_sums_into(dy, db.data_mut());
    want_dx.then(|| {
        let mut dx = vec![T::zero(); rows * din];
        matmul_a_bt_into(dy, w.data(), rows, dout, din, &mut dx, false);
        dx
    })
}

/// `PE[pos, 2i] = sin(pos / 10000^(2i/d))`, `PE[pos, 2i+1] = cos(…)`.
pub fn positional_encoding<T: Real>(frames: usize, dim: usize) -> Result<Tensor<T>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "positional encoding dimension {dim} must be even and positive"
        )));
    }
    if frames == 0 {
        return Err(Error::Parameter("positional encoding needs at least one frame".into()));
    }
    Ok(Tensor::from_fn(&[frames, dim], |idx| {
        let (pos, col) = (idx / dim, idx % dim);
        let i2 = (col - col % 2) as f64;
        let angle = pos as f64 / 10000f64.powf(i2 / dim as f64);
        T::of(if col % 2 == 0 { angle.sin() } else { angle.cos() })
    }))
}

/// Projection weights of one attention block, each `[d × d]` with `[d]` bias.
#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights<'a, T> {
    pub wq: &'a Tensor<T>,
    pub bq: &'a Tensor<T>,
    pub wk: &'a Tensor<T>,
    pub bk: &'a Tensor<T>,
    pub wv: &'a Tensor<T>,
    pub bv: &'a Tensor<T>,
    pub wo: &'a Tensor<T>,
    pub bo: &'a Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct AttentionOutput<T> {
    /// `[T × d]` after the output projection.
    pub output: Tensor<T>,
    /// `[heads × T × T]` row-stochastic attention weights.
    pub weights: Tensor<T>,
}

fn gather_head<T: Real>(x: &[T], frames: usize, d: usize, head: usize, dh: usize, out: &mut [T]) {
    for t in 0..frames {
        out[t * dh..(t + 1) * dh].copy_from_slice(&x[t * d + head * dh..t * d + (head + 1) * dh]);
    }
}

fn scatter_head<T: Real>(src: &[T], frames: usize, d: usize, head: usize, dh: usize, x: &mut [T]) {
    for t in 0..frames {
        x[t * d + head * dh..t * d + (head + 1) * dh].copy_from_slice(&src[t * dh..(t + 1) * dh]);
    }
}

/// Scaled dot-product attention over already-projected `q`, `k`, `v`
/// (`[frames × d]` each, one sequence). Writes concatenated head outputs to
/// `concat` and the attention weights to `probs` (`[heads × frames × frames]`).
pub(crate) fn attention_core<T: Real>(
    q: &[T],
    k: &[T],
    v: &[T],
    frames: usize,
    d: usize,
    heads: usize,
    probs: &mut [T],
    concat: &mut [T],
) {
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let mut qh = vec![T::zero(); frames * dh];
    let mut kh = vec![T::zero(); frames * dh];
    let mut vh = vec![T::zero(); frames * dh];
    let mut oh = vec![T::zero(); frames * dh];
    for h in 0..heads {
        gather_head(q, frames, d, h, dh, &mut qh);
        gather_head(k, frames, d, h, dh, &mut kh);
        gather_head(v, frames, d, h, dh, &mut vh);
        let p = &mut probs[h * frames * frames..(h + 1) * frames * frames];
        matmul_a_bt_into(&qh, &kh, frames, dh, frames, p, false);
        for row in p.chunks_exact_mut(frames) {
            row.iter_mut().for_each(|s| *s *= scale);
            softmax_in_place(row);
        }
        matmul_into(p, &vh, frames, frames, dh, &mut oh, false);
        scatter_head(&oh, frames, d, h, dh, concat);
    }
}

/// Backward of [`attention_core`]: gradients for the projected `q`, `k`, `v`.
pub(crate) fn attention_core_backward<T: Real>(
    q: &[T],
    k: &[T],
    v: &[T],
    probs: &[T],
    d_concat: &[T],
    frames: usize,
    d: usize,
    heads: usize,
    dq: &mut [T],
    dk: &mut [T],
    dv: &mut [T],
) {
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let mut qh = vec![T::zero(); frames * dh];
    let mut kh = vec![T::zero(); frames * dh];
    let mut vh = vec![T::zero(); frames * dh];
    let mut doh = vec![T::zero(); frames * dh];
    let mut dp = vec![T::zero(); frames * frames];
    let mut buf = vec![T::zero(); frames * dh];
    for h in 0..heads {
        gather_head(q, frames, d, h, dh, &mut qh);
        gather_head(k, frames, d, h, dh, &mut kh);
        gather_head(v, frames, d, h, dh, &mut vh);
        gather_head(d_concat, frames, d, h, dh, &mut doh);
        let p = &probs[h * frames * frames..(h + 1) * frames * frames];

        // dV = Pᵀ dO
        buf.iter_mut().for_each(|x| *x = T::zero());
        matmul_at_b_into(p, &doh, frames, frames, dh, &mut buf);
        scatter_head(&buf, frames, d, h, dh, dv);

        // dP = dO Vᵀ, then through the row softmax and the 1/√dh scale.
        matmul_a_bt_into(&doh, &vh, frames, dh, frames, &mut dp, false);
        for r in 0..frames {
            let prow = &p[r * frames..(r + 1) * frames];
            let drow = &mut dp[r * frames..(r + 1) * frames];
            let dot: T = prow.iter().zip(drow.iter()).map(|(&a, &b)| a * b).sum();
            for (g, &pv) in drow.iter_mut().zip(prow) {
                *g = pv * (*g - dot) * scale;
            }
        }
        // dQ = dS K, dK = dSᵀ Q
        matmul_into(&dp, &kh, frames, frames, dh, &mut buf, false);
        scatter_head(&buf, frames, d, h, dh, dq);
        buf.iter_mut().for_each(|x| *x = T::zero());
        matmul_at_b_into(&dp, &qh, frames, frames, dh, &mut buf);
        scatter_head(&buf, frames, d, h, dh, dk);
    }
}

/// Multi-head self- or cross-attention for a single sequence:
/// `softmax(Q Kᵀ / √(d/heads)) V` per head, concatenated, then projected.
pub fn multi_head_attention<T: Real>(
    q_in: &Tensor<T>,
    k_in: &Tensor<T>,
    v_in: &Tensor<T>,
    weights: &AttentionWeights<'_, T>,
    heads: usize,
) -> Result<AttentionOutput<T>> {
    let &[frames, d] = q_in.shape() else {
        return Err(Error::Dimension(format!("attention query must be T×d, got {:?}", q_in.shape())));
    };
    if k_in.shape() != [frames, d] || v_in.shape() != [frames, d] {
        return Err(Error::Dimension("attention q, k, v shapes differ".into()));
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::Parameter(format!("model dim {d} not divisible by {heads} heads")));
    }
    for w in [weights.wq, weights.wk, weights.wv, weights.wo] {
        if w.shape() != [d, d] {
            return Err(Error::Dimension(format!("attention weight must be [{d}, {d}], got {:?}", w.shape())));
        }
    }
    let q = linear(q_in.data(), frames, weights.wq, weights.bq);
    let k = linear(k_in.data(), frames, weights.wk, weights.bk);
    let v = linear(v_in.data(), frames, weights.wv, weights.bv);
    let mut probs = vec![T::zero(); heads * frames * frames];
    let mut concat = vec![T::zero(); frames * d];
    attention_core(&q, &k, &v, frames, d, heads, &mut probs, &mut concat);
    let out = linear(&concat, frames, weights.wo, weights.bo);
    Ok(AttentionOutput {
        output: Tensor::new(vec![frames, d], out)?,
        weights: Tensor::new(vec![heads, frames, frames], probs)?,
    })
}
