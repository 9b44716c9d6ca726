//! Tensor operations and the slice kernels the models are built from.
//!
//! All reductions run in a fixed order (ascending index) so results are
//! bitwise reproducible.

use crate::error::{Error, Result};
use crate::numerics::{Real, Rng, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub fn ensure_finite<T: Real>(what: &str, values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Data(format!("{what}: non-finite value at index {i}"))),
    }
}

/// `out (+)= a[m×k] · b[k×n]`.
pub fn matmul_into<T: Real>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    out: &mut [T],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    if !accumulate {
        out.iter_mut().for_each(|v| *v = T::zero());
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out += aᵀ · b` with `a[k×m]`, `b[k×n]`, `out[m×n]`.
pub fn matmul_at_b_into<T: Real>(a: &[T], b: &[T], k: usize, m: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out (+)= a · bᵀ` with `a[m×k]`, `b[n×k]`, `out[m×n]`.
pub fn matmul_a_bt_into<T: Real>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    out: &mut [T],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            if accumulate {
                out[i * n + j] += acc;
            } else {
                out[i * n + j] = acc;
            }
        }
    }
}

pub fn add_bias_rows<T: Real>(x: &mut [T], bias: &[T]) {
    let n = bias.len();
    for row in x.chunks_exact_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// `out += Σ_rows x`.
pub fn col_sums_into<T: Real>(x: &[T], out: &mut [T]) {
    let n = out.len();
    for row in x.chunks_exact(n) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

pub fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Numerically stable softmax over a single row.
pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (&[m, k], &[k2, n]) = (a.shape(), b.shape()) else {
        return Err(Error::Dimension(format!(
            "matmul needs two matrices, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    };
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner extents differ: {:?} × {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[m, n]);
    matmul_into(a.data(), b.data(), m, k, n, out.data_mut(), false);
    Ok(out)
}

pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 1 {
        return Err(Error::Dimension(format!(
            "softmax expects a vector, got {:?}",
            logits.shape()
        )));
    }
    let mut out = logits.clone();
    softmax_in_place(out.data_mut());
    Ok(out)
}

/// Patch matrix `[H·W × 9·Cin]` for a 3×3 kernel with one pixel of zero padding.
/// Column `(di·3 + dj)·Cin + ci` holds `input[h+di−1, w+dj−1, ci]`.
pub fn im2col_3x3<T: Real>(input: &[T], h: usize, w: usize, cin: usize, out: &mut [T]) {
    let cols = 9 * cin;
    debug_assert_eq!(input.len(), h * w * cin);
    debug_assert_eq!(out.len(), h * w * cols);
    for r in 0..h {
        for c in 0..w {
            let patch = &mut out[(r * w + c) * cols..(r * w + c + 1) * cols];
            for di in 0..3 {
                for dj in 0..3 {
                    let dst = &mut patch[(di * 3 + dj) * cin..(di * 3 + dj + 1) * cin];
                    let (rr, cc) = (r + di, c + dj);
                    if rr == 0 || cc == 0 || rr > h || cc > w {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                    } else {
                        let src = ((rr - 1) * w + (cc - 1)) * cin;
                        dst.copy_from_slice(&input[src..src + cin]);
                    }
                }
            }
        }
    }
}

fn conv_dims<T: Real>(input: &Tensor<T>, kernels: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let &[h, w, cin] = input.shape() else {
        return Err(Error::Dimension(format!(
            "conv input must be H×W×Cin, got {:?}",
            input.shape()
        )));
    };
    let &[3, 3, kc, cout] = kernels.shape() else {
        return Err(Error::Dimension(format!(
            "conv kernels must be 3×3×Cin×Cout, got {:?}",
            kernels.shape()
        )));
    };
    if kc != cin {
        return Err(Error::Dimension(format!(
            "conv channel mismatch: input has {cin}, kernels expect {kc}"
        )));
    }
    Ok((h, w, cin, cout))
}

/// Same-size 3×3 cross-correlation with zero padding 1.
pub fn conv2d_same<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (h, w, cin, cout) = conv_dims(input, kernels)?;
    if bias.shape() != [cout] {
        return Err(Error::Dimension(format!(
            "conv bias must be [{cout}], got {:?}",
            bias.shape()
        )));
    }
    let mut cols = vec![T::zero(); h * w * 9 * cin];
    im2col_3x3(input.data(), h, w, cin, &mut cols);
    let mut out = Tensor::zeros(&[h, w, cout]);
    matmul_into(&cols, kernels.data(), h * w, 9 * cin, cout, out.data_mut(), false);
    add_bias_rows(out.data_mut(), bias.data());
    Ok(out)
}

/// Gradients of [`conv2d_same`] with respect to input, kernels and bias.
pub fn conv2d_same_backward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (h, w, cin, cout) = conv_dims(input, kernels)?;
    if grad_out.shape() != [h, w, cout] {
        return Err(Error::Dimension(format!(
            "conv output gradient must be [{h}, {w}, {cout}], got {:?}",
            grad_out.shape()
        )));
    }
    let k = 9 * cin;
    let mut cols = vec![T::zero(); h * w * k];
    im2col_3x3(input.data(), h, w, cin, &mut cols);

    let mut d_kernels = Tensor::zeros(kernels.shape());
    matmul_at_b_into(&cols, grad_out.data(), h * w, k, cout, d_kernels.data_mut());
    let mut d_bias = Tensor::zeros(&[cout]);
    col_sums_into(grad_out.data(), d_bias.data_mut());

    let mut d_cols = vec![T::zero(); h * w * k];
    matmul_a_bt_into(grad_out.data(), kernels.data(), h * w, cout, k, &mut d_cols, false);
    let mut d_input = Tensor::zeros(input.shape());
    let di_data = d_input.data_mut();
    for r in 0..h {
        for c in 0..w {
            let patch = &d_cols[(r * w + c) * k..(r * w + c + 1) * k];
            for di in 0..3 {
                for dj in 0..3 {
                    let (rr, cc) = (r + di, c + dj);
                    if rr == 0 || cc == 0 || rr > h || cc > w {
                        continue;
                    }
                    let dst = ((rr - 1) * w + (cc - 1)) * cin;
                    for ci in 0..cin {
                        di_data[dst + ci] += patch[(di * 3 + dj) * cin + ci];
                    }
                }
            }
        }
    }
    Ok((d_input, d_kernels, d_bias))
}

/// Per-row normalization statistics kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct LayerNormCache<T> {
    pub normalized: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Row-wise layer normalization of `x[rows × d]` into `out`.
pub fn layer_norm_rows<T: Real>(
    x: &[T],
    gain: &[T],
    shift: &[T],
    eps: T,
    out: &mut [T],
) -> LayerNormCache<T> {
    let d = gain.len();
    let rows = x.len() / d;
    let dn = T::of(d as f64);
    let mut cache = LayerNormCache {
        normalized: vec![T::zero(); x.len()],
        inv_std: Vec::with_capacity(rows),
    };
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() / dn;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
        let inv = T::one() / (var + eps).sqrt();
        cache.inv_std.push(inv);
        let xhat = &mut cache.normalized[r * d..(r + 1) * d];
        let o = &mut out[r * d..(r + 1) * d];
        for i in 0..d {
            xhat[i] = (row[i] - mean) * inv;
            o[i] = xhat[i] * gain[i] + shift[i];
        }
    }
    cache
}

/// Backward of [`layer_norm_rows`]: writes `dx` and accumulates into
/// `d_gain`/`d_shift`.
pub fn layer_norm_rows_backward<T: Real>(
    cache: &LayerNormCache<T>,
    gain: &[T],
    dy: &[T],
    dx: &mut [T],
    d_gain: &mut [T],
    d_shift: &mut [T],
) {
    let d = gain.len();
    let dn = T::of(d as f64);
    for (r, &inv) in cache.inv_std.iter().enumerate() {
        let xhat = &cache.normalized[r * d..(r + 1) * d];
        let g = &dy[r * d..(r + 1) * d];
        let mut sum_dxhat = T::zero();
        let mut sum_dxhat_xhat = T::zero();
        for i in 0..d {
            let dxhat = g[i] * gain[i];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat[i];
            d_gain[i] += g[i] * xhat[i];
            d_shift[i] += g[i];
        }
        let out = &mut dx[r * d..(r + 1) * d];
        for i in 0..d {
            let dxhat = g[i] * gain[i];
            out[i] = inv / dn * (dn * dxhat - sum_dxhat - xhat[i] * sum_dxhat_xhat);
        }
    }
}

pub fn layer_norm<T: Real>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    shift: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let d = x.len();
    if x.rank() != 1 || gain.shape() != [d] || shift.shape() != [d] {
        return Err(Error::Dimension(format!(
            "layer_norm shapes {:?}, {:?}, {:?} disagree",
            x.shape(),
            gain.shape(),
            shift.shape()
        )));
    }
    if eps <= 0.0 {
        return Err(Error::Parameter(format!("layer_norm epsilon {eps} must be > 0")));
    }
    let mut out = Tensor::zeros(&[d]);
    layer_norm_rows(x.data(), gain.data(), shift.data(), T::of(eps), out.data_mut());
    Ok(out)
}

fn check_drop_prob(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!(
            "dropout probability {p} must lie in [0, 1)"
        )));
    }
    Ok(())
}

/// Inverted-dropout multipliers: `0` with probability `p`, else `1/(1−p)`.
pub fn dropout_mask<T: Real>(len: usize, p: f64, rng: &mut Rng) -> Result<Vec<T>> {
    check_drop_prob(p)?;
    if p == 0.0 {
        return Ok(vec![T::one(); len]);
    }
    let keep = T::of(1.0 / (1.0 - p));
    Ok((0..len)
        .map(|_| if rng.uniform() < p { T::zero() } else { keep })
        .collect())
}

pub fn dropout<T: Real>(x: &Tensor<T>, p: f64, rng: &mut Rng, training: bool) -> Result<Tensor<T>> {
    check_drop_prob(p)?;
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask::<T>(x.len(), p, rng)?;
    let mut out = x.clone();
    for (v, m) in out.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    Ok(out)
}
