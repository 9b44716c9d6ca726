//! Post-norm self-attention encoder with sinusoidal positions, mean pooling
//! over frames and a linear head.

use crate::error::{Error, Result};
use crate::models::layers::{attention_core, attention_core_backward, linear, linear_backward, positional_encoding};
use crate::models::{batch_dims, Logits, ModelKind, ModelParams};
use crate::numerics::{dropout_mask, layer_norm_rows, layer_norm_rows_backward, LayerNormCache, Real, Rng, Tensor, LAYER_NORM_EPS};

#[derive(Clone, Debug)]
struct LayerTape<T> {
    input: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<T>,
    concat: Vec<T>,
    attn_mask: Vec<T>,
    ln1: LayerNormCache<T>,
    mid: Vec<T>,
    hidden: Vec<T>,
    ffn_mask: Vec<T>,
    ln2: LayerNormCache<T>,
}

#[derive(Clone, Debug)]
pub struct TransformerTape<T> {
    batch: usize,
    frames: usize,
    input: Vec<T>,
    layers: Vec<LayerTape<T>>,
    pooled: Vec<T>,
}

fn mask<T: Real>(len: usize, p: f64, training: bool, rng: &mut Rng) -> Result<Vec<T>> {
    if training {
        dropout_mask(len, p, rng)
    } else {
        Ok(vec![T::one(); len])
    }
}

pub(crate) fn forward<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut Rng,
) -> Result<(Tensor<T>, TransformerTape<T>)> {
    let (b, t) = batch_dims(batch)?;
    let cfg = params.config();
    let (d, heads, k) = (cfg.model_dim, cfg.heads, cfg.num_classes);
    let n = b * t;
    let eps = T::of(LAYER_NORM_EPS);

    let mut x = linear(batch.data(), n, params.get("input.weight"), params.get("input.bias"));
    if cfg.positional_encoding {
        let pe = positional_encoding::<T>(t, d)?;
        for row in x.chunks_exact_mut(t * d) {
            for (v, &p) in row.iter_mut().zip(pe.data()) {
                *v += p;
            }
        }
    }

    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let p = |s: &str| params.get(&format!("layer{l}.{s}"));
        let q = linear(&x, n, p("attn.wq"), p("attn.bq"));
        let kk = linear(&x, n, p("attn.wk"), p("attn.bk"));
        let v = linear(&x, n, p("attn.wv"), p("attn.bv"));
        let mut probs = vec![T::zero(); b * heads * t * t];
        let mut concat = vec![T::zero(); n * d];
        for s in 0..b {
            let rows = s * t * d..(s + 1) * t * d;
            attention_core(
                &q[rows.clone()],
                &kk[rows.clone()],
                &v[rows.clone()],
                t,
                d,
                heads,
                &mut probs[s * heads * t * t..(s + 1) * heads * t * t],
                &mut concat[rows],
            );
        }
        let attn = linear(&concat, n, p("attn.wo"), p("attn.bo"));
        let attn_mask = mask(n * d, cfg.dropout, training, rng)?;
        let resid: Vec<T> = x
            .iter()
            .zip(&attn)
            .zip(&attn_mask)
            .map(|((&xi, &a), &m)| xi + a * m)
            .collect();
        let mut mid = vec![T::zero(); n * d];
        let ln1 = layer_norm_rows(&resid, p("ln1.gain").data(), p("ln1.shift").data(), eps, &mut mid);

        let mut hidden = linear(&mid, n, p("ffn.w1"), p("ffn.b1"));
        crate::numerics::relu_in_place(&mut hidden);
        let ffn = linear(&hidden, n, p("ffn.w2"), p("ffn.b2"));
        let ffn_mask = mask(n * d, cfg.dropout, training, rng)?;
        let resid: Vec<T> = mid
            .iter()
            .zip(&ffn)
            .zip(&ffn_mask)
            .map(|((&xi, &a), &m)| xi + a * m)
            .collect();
        let mut out = vec![T::zero(); n * d];
        let ln2 = layer_norm_rows(&resid, p("ln2.gain").data(), p("ln2.shift").data(), eps, &mut out);

        layers.push(LayerTape {
            input: std::mem::replace(&mut x, out),
            q,
            k: kk,
            v,
            probs,
            concat,
            attn_mask,
            ln1,
            mid,
            hidden,
            ffn_mask,
            ln2,
        });
    }

    let mut pooled = vec![T::zero(); b * d];
    let inv_t = T::one() / T::of(t as f64);
    for s in 0..b {
        let acc = &mut pooled[s * d..(s + 1) * d];
        for row in x[s * t * d..(s + 1) * t * d].chunks_exact(d) {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a *= inv_t);
    }
    let logits = linear(&pooled, b, params.get("head.weight"), params.get("head.bias"));
    let tape = TransformerTape {
        batch: b,
        frames: t,
        input: batch.data().to_vec(),
        layers,
        pooled,
    };
    Ok((Tensor::new(vec![b, k], logits)?, tape))
}

/// Runs [`linear_backward`] against the gradient slots of `w`/`b`.
fn dense_backward<T: Real>(
    params: &ModelParams<T>,
    grads: &mut [Tensor<T>],
    w: &str,
    b: &str,
    x: &[T],
    rows: usize,
    dy: &[T],
    want_dx: bool,
) -> Option<Vec<T>> {
    let (wi, bi) = (params.index_of(w), params.index_of(b));
    let mut dw = std::mem::replace(&mut grads[wi], Tensor::zeros(&[1]));
    let mut db = std::mem::replace(&mut grads[bi], Tensor::zeros(&[1]));
    let dx = linear_backward(x, rows, params.get(w), dy, &mut dw, &mut db, want_dx);
    grads[wi] = dw;
    grads[bi] = db;
    dx
}

fn ln_backward<T: Real>(
    params: &ModelParams<T>,
    grads: &mut [Tensor<T>],
    prefix: &str,
    cache: &LayerNormCache<T>,
    dy: &[T],
) -> Vec<T> {
    let (gi, si) = (params.index_of(&format!("{prefix}.gain")), params.index_of(&format!("{prefix}.shift")));
    let mut d_gain = std::mem::replace(&mut grads[gi], Tensor::zeros(&[1]));
    let mut d_shift = std::mem::replace(&mut grads[si], Tensor::zeros(&[1]));
    let mut dx = vec![T::zero(); dy.len()];
    layer_norm_rows_backward(
        cache,
        params.tensors()[gi].data(),
        dy,
        &mut dx,
        d_gain.data_mut(),
        d_shift.data_mut(),
    );
    grads[gi] = d_gain;
    grads[si] = d_shift;
    dx
}

pub(crate) fn backward<T: Real>(
    params: &ModelParams<T>,
    tape: &TransformerTape<T>,
    d_logits: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let cfg = params.config();
    let (b, t) = (tape.batch, tape.frames);
    let (d, heads, k) = (cfg.model_dim, cfg.heads, cfg.num_classes);
    if d_logits.shape() != [b, k] {
        return Err(Error::Dimension(format!(
            "logit gradient must be [{b}, {k}], got {:?}",
            d_logits.shape()
        )));
    }
    let n = b * t;
    let mut grads = params.zeros_like();

    let d_pooled = dense_backward(params, &mut grads, "head.weight", "head.bias", &tape.pooled, b, d_logits.data(), true)
        .expect("input gradient requested");
    let inv_t = T::one() / T::of(t as f64);
    let mut dy = vec![T::zero(); n * d];
    for s in 0..b {
        let g = &d_pooled[s * d..(s + 1) * d];
        for row in dy[s * t * d..(s + 1) * t * d].chunks_exact_mut(d) {
            for (o, &v) in row.iter_mut().zip(g) {
                *o = v * inv_t;
            }
        }
    }

    for (l, lt) in tape.layers.iter().enumerate().rev() {
        let name = |s: &str| format!("layer{l}.{s}");
        // Feed-forward sublayer.
        let d_resid2 = ln_backward(params, &mut grads, &name("ln2"), &lt.ln2, &dy);
        let d_ffn: Vec<T> = d_resid2.iter().zip(&lt.ffn_mask).map(|(&g, &m)| g * m).collect();
        let mut d_hidden = dense_backward(params, &mut grads, &name("ffn.w2"), &name("ffn.b2"), &lt.hidden, n, &d_ffn, true)
            .expect("input gradient requested");
        for (g, &h) in d_hidden.iter_mut().zip(&lt.hidden) {
            if h <= T::zero() {
                *g = T::zero();
            }
        }
        let d_mid_ffn = dense_backward(params, &mut grads, &name("ffn.w1"), &name("ffn.b1"), &lt.mid, n, &d_hidden, true)
            .expect("input gradient requested");
        let d_mid: Vec<T> = d_resid2.iter().zip(&d_mid_ffn).map(|(&a, &c)| a + c).collect();

        // Attention sublayer.
        let d_resid1 = ln_backward(params, &mut grads, &name("ln1"), &lt.ln1, &d_mid);
        let d_attn: Vec<T> = d_resid1.iter().zip(&lt.attn_mask).map(|(&g, &m)| g * m).collect();
        let d_concat = dense_backward(params, &mut grads, &name("attn.wo"), &name("attn.bo"), &lt.concat, n, &d_attn, true)
            .expect("input gradient requested");
        let mut dq = vec![T::zero(); n * d];
        let mut dk = vec![T::zero(); n * d];
        let mut dv = vec![T::zero(); n * d];
        for s in 0..b {
            let rows = s * t * d..(s + 1) * t * d;
            attention_core_backward(
                &lt.q[rows.clone()],
                &lt.k[rows.clone()],
                &lt.v[rows.clone()],
                &lt.probs[s * heads * t * t..(s + 1) * heads * t * t],
                &d_concat[rows.clone()],
                t,
                d,
                heads,
                &mut dq[rows.clone()],
                &mut dk[rows.clone()],
                &mut dv[rows],
            );
        }
        let mut dx = d_resid1;
        for (proj, grad) in [("q", &dq), ("k", &dk), ("v", &dv)] {
            let part = dense_backward(
                params,
                &mut grads,
                &name(&format!("attn.w{proj}")),
                &name(&format!("attn.b{proj}")),
                &lt.input,
                n,
                grad,
                true,
            )
            .expect("input gradient requested");
            dx.iter_mut().zip(&part).for_each(|(a, &c)| *a += c);
        }
        dy = dx;
    }

    // Positional encodings are constant, so the embedding gradient is `dy`.
    dense_backward(params, &mut grads, "input.weight", "input.bias", &tape.input, n, &dy, false);
    Ok(grads)
}

/// Logits of the Transformer encoder classifier.
pub fn transformer_forward<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut Rng,
) -> Result<Logits<T>> {
    if params.kind() != ModelKind::Transformer {
        return Err(Error::Parameter(format!("expected transformer parameters, got {}", params.kind())));
    }
    crate::models::forward(params, batch, training, rng)
}
