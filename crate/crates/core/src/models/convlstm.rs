//! Per-frame 3×3 convolution over the 21×3 landmark grid, a single
//! unidirectional LSTM over time, and a linear head on the final hidden state.

use crate::error::{Error, Result};
use crate::models::layers::{linear, linear_backward};
use crate::models::{batch_dims, ModelKind, ModelParams};
use crate::numerics::{
    col_sums_into, dropout_mask, im2col_3x3, matmul_a_bt_into, matmul_at_b_into, matmul_into, Real, Rng, Tensor,
};
use crate::{COORDS, FEATURE_DIM, LANDMARKS};

/// Borrowed LSTM weights: `w_ih [d_in × 4H]`, `w_hh [H × 4H]`, `bias [4H]`,
/// gate blocks ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights<'a, T> {
    pub w_ih: &'a Tensor<T>,
    pub w_hh: &'a Tensor<T>,
    pub bias: &'a Tensor<T>,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Applies gate nonlinearities to pre-activations `z [4H]` in place and
/// advances `c`, `h`.
fn cell_update<T: Real>(z: &mut [T], c: &mut [T], h: &mut [T]) {
    let hidden = c.len();
    let (ifg, o) = z.split_at_mut(3 * hidden);
    let (i, fg) = ifg.split_at_mut(hidden);
    let (f, g) = fg.split_at_mut(hidden);
    for u in 0..hidden {
        i[u] = sigmoid(i[u]);
        f[u] = sigmoid(f[u]);
        g[u] = g[u].tanh();
        o[u] = sigmoid(o[u]);
        c[u] = f[u] * c[u] + i[u] * g[u];
        h[u] = o[u] * c[u].tanh();
    }
}

/// One LSTM step: returns `(h', c')`.
pub fn lstm_cell<T: Real>(
    x: &Tensor<T>,
    h: &Tensor<T>,
    c: &Tensor<T>,
    weights: &LstmWeights<'_, T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let hidden = h.len();
    let d_in = x.len();
    if c.len() != hidden
        || weights.w_ih.shape() != [d_in, 4 * hidden]
        || weights.w_hh.shape() != [hidden, 4 * hidden]
        || weights.bias.shape() != [4 * hidden]
    {
        return Err(Error::Dimension(format!(
            "lstm_cell shapes disagree: x {:?}, h {:?}, c {:?}, w_ih {:?}, w_hh {:?}, bias {:?}",
            x.shape(),
            h.shape(),
            c.shape(),
            weights.w_ih.shape(),
            weights.w_hh.shape(),
            weights.bias.shape()
        )));
    }
    let mut z = weights.bias.data().to_vec();
    matmul_into(x.data(), weights.w_ih.data(), 1, d_in, 4 * hidden, &mut z, true);
    matmul_into(h.data(), weights.w_hh.data(), 1, hidden, 4 * hidden, &mut z, true);
    let mut c2 = c.data().to_vec();
    let mut h2 = vec![T::zero(); hidden];
    cell_update(&mut z, &mut c2, &mut h2);
    Ok((Tensor::new(vec![hidden], h2)?, Tensor::new(vec![hidden], c2)?))
}

#[derive(Clone, Debug)]
pub struct ConvLstmTape<T> {
    batch: usize,
    frames: usize,
    /// im2col patches of every frame, `[B·T·63 × 9]`.
    cols: Vec<T>,
    /// Post-ReLU conv features, `[B·T × 63F]`, rows ordered (sample, frame).
    features: Vec<T>,
    /// Activated gates per step, `[T × B × 4H]`.
    gates: Vec<T>,
    /// Cell states `c_0..c_T`, `[(T+1) × B × H]`.
    cells: Vec<T>,
    /// Hidden states `h_0..h_T`, `[(T+1) × B × H]`.
    hidden: Vec<T>,
    /// Final hidden state after dropout, `[B × H]`.
    readout: Vec<T>,
    mask: Vec<T>,
}

pub(crate) fn forward<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut Rng,
) -> Result<(Tensor<T>, ConvLstmTape<T>)> {
    let (b, t) = batch_dims(batch)?;
    let cfg = params.config();
    let (f, hd, k) = (cfg.conv_filters, cfg.lstm_units, cfg.num_classes);
    let frames_total = b * t;
    let din = FEATURE_DIM * f;

    // Convolution over every frame at once: each frame is a 21×3×1 grid.
    let mut cols = vec![T::zero(); frames_total * FEATURE_DIM * 9];
    for (frame, patch) in batch
        .data()
        .chunks_exact(FEATURE_DIM)
        .zip(cols.chunks_exact_mut(FEATURE_DIM * 9))
    {
        im2col_3x3(frame, LANDMARKS, COORDS, 1, patch);
    }
    let mut features = vec![T::zero(); frames_total * din];
    matmul_into(&cols, params.get("conv.kernel").data(), frames_total * FEATURE_DIM, 9, f, &mut features, false);
    let conv_bias = params.get("conv.bias").data();
    for (i, v) in features.iter_mut().enumerate() {
        *v += conv_bias[i % f];
        if *v < T::zero() {
            *v = T::zero();
        }
    }

    // Input contributions for all steps, then the recurrence.
    let xw = linear(&features, frames_total, params.get("lstm.w_ih"), params.get("lstm.bias"));
    let w_hh = params.get("lstm.w_hh").data();
    let g4 = 4 * hd;
    let mut gates = vec![T::zero(); t * b * g4];
    let mut cells = vec![T::zero(); (t + 1) * b * hd];
    let mut hidden = vec![T::zero(); (t + 1) * b * hd];
    for step in 0..t {
        let z = &mut gates[step * b * g4..(step + 1) * b * g4];
        for s in 0..b {
            let row = (s * t + step) * g4;
            z[s * g4..(s + 1) * g4].copy_from_slice(&xw[row..row + g4]);
        }
        let (h_prev, h_next) = hidden.split_at_mut((step + 1) * b * hd);
        let h_prev = &h_prev[step * b * hd..];
        matmul_into(h_prev, w_hh, b, hd, g4, z, true);
        let (c_prev, c_next) = cells.split_at_mut((step + 1) * b * hd);
        let c_next = &mut c_next[..b * hd];
        c_next.copy_from_slice(&c_prev[step * b * hd..]);
        let h_next = &mut h_next[..b * hd];
        for s in 0..b {
            cell_update(
                &mut z[s * g4..(s + 1) * g4],
                &mut c_next[s * hd..(s + 1) * hd],
                &mut h_next[s * hd..(s + 1) * hd],
            );
        }
    }

    let last = &hidden[t * b * hd..];
    let mask = if training {
        dropout_mask(b * hd, cfg.dropout, rng)?
    } else {
        vec![T::one(); b * hd]
    };
    let readout: Vec<T> = last.iter().zip(&mask).map(|(&h, &m)| h * m).collect();
    let logits = linear(&readout, b, params.get("head.weight"), params.get("head.bias"));
    let tape = ConvLstmTape {
        batch: b,
        frames: t,
        cols,
        features,
        gates,
        cells,
        hidden,
        readout,
        mask,
    };
    Ok((Tensor::new(vec![b, k], logits)?, tape))
}

pub(crate) fn backward<T: Real>(
    params: &ModelParams<T>,
    tape: &ConvLstmTape<T>,
    d_logits: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let cfg = params.config();
    let (b, t) = (tape.batch, tape.frames);
    let (f, hd, k) = (cfg.conv_filters, cfg.lstm_units, cfg.num_classes);
    if d_logits.shape() != [b, k] {
        return Err(Error::Dimension(format!(
            "logit gradient must be [{b}, {k}], got {:?}",
            d_logits.shape()
        )));
    }
    let mut grads = params.zeros_like();
    let idx = |name: &str| params.index_of(name);
    let g4 = 4 * hd;
    let din = FEATURE_DIM * f;

    // Head and dropout.
    let (hw, hb) = (idx("head.weight"), idx("head.bias"));
    let mut d_head_w = std::mem::replace(&mut grads[hw], Tensor::zeros(&[1]));
    let mut d_head_b = std::mem::replace(&mut grads[hb], Tensor::zeros(&[1]));
    let d_readout = linear_backward(
        &tape.readout,
        b,
        params.get("head.weight"),
        d_logits.data(),
        &mut d_head_w,
        &mut d_head_b,
        true,
    )
    .expect("input gradient requested");
    grads[hw] = d_head_w;
    grads[hb] = d_head_b;
    let mut dh: Vec<T> = d_readout.iter().zip(&tape.mask).map(|(&g, &m)| g * m).collect();

    // Backpropagation through time.
    let w_hh = params.get("lstm.w_hh").data();
    let mut dc = vec![T::zero(); b * hd];
    let mut dz = vec![T::zero(); b * g4];
    let mut d_xw = vec![T::zero(); b * t * g4];
    let d_whh = grads[idx("lstm.w_hh")].data_mut();
    for step in (0..t).rev() {
        let gates = &tape.gates[step * b * g4..(step + 1) * b * g4];
        let c_prev = &tape.cells[step * b * hd..(step + 1) * b * hd];
        let c_cur = &tape.cells[(step + 1) * b * hd..(step + 2) * b * hd];
        for s in 0..b {
            let gs = &gates[s * g4..(s + 1) * g4];
            let dzs = &mut dz[s * g4..(s + 1) * g4];
            for u in 0..hd {
                let (i, fg, g, o) = (gs[u], gs[hd + u], gs[2 * hd + u], gs[3 * hd + u]);
                let tc = c_cur[s * hd + u].tanh();
                let dh_u = dh[s * hd + u];
                let dc_u = dc[s * hd + u] + dh_u * o * (T::one() - tc * tc);
                dzs[u] = dc_u * g * i * (T::one() - i);
                dzs[hd + u] = dc_u * c_prev[s * hd + u] * fg * (T::one() - fg);
                dzs[2 * hd + u] = dc_u * i * (T::one() - g * g);
                dzs[3 * hd + u] = dh_u * tc * o * (T::one() - o);
                dc[s * hd + u] = dc_u * fg;
            }
            let row = (s * t + step) * g4;
            d_xw[row..row + g4].copy_from_slice(dzs);
        }
        let h_prev = &tape.hidden[step * b * hd..(step + 1) * b * hd];
        matmul_at_b_into(h_prev, &dz, b, hd, g4, d_whh);
        matmul_a_bt_into(&dz, w_hh, b, g4, hd, &mut dh, false);
    }

    // Input projection.
    let frames_total = b * t;
    col_sums_into(&d_xw, grads[idx("lstm.bias")].data_mut());
    matmul_at_b_into(&tape.features, &d_xw, frames_total, din, g4, grads[idx("lstm.w_ih")].data_mut());
    let mut d_features = vec![T::zero(); frames_total * din];
    matmul_a_bt_into(&d_xw, params.get("lstm.w_ih").data(), frames_total, g4, din, &mut d_features, false);

    // Through ReLU into the convolution.
    for (g, &a) in d_features.iter_mut().zip(&tape.features) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
    col_sums_into(&d_features, grads[idx("conv.bias")].data_mut());
    matmul_at_b_into(
        &tape.cols,
        &d_features,
        frames_total * FEATURE_DIM,
        9,
        f,
        grads[idx("conv.kernel")].data_mut(),
    );
    Ok(grads)
}

/// Logits of the ConvLSTM classifier.
pub fn convlstm_forward<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut Rng,
) -> Result<crate::models::Logits<T>> {
    if params.kind() != ModelKind::ConvLstm {
        return Err(Error::Parameter(format!("expected convlstm parameters, got {}", params.kind())));
    }
    crate::models::forward(params, batch, training, rng)
}
