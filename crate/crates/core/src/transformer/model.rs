//! Forward and reverse passes of the encoder classifier.
//!
//! A batch of `B` rows with `T` features becomes `B·T` tokens of width
//! `d_model`, stored row-major as one `(B·T) × d_model` matrix so the
//! projections and feed-forward maps run as single matrix products.
//!
//! Per layer (pre-norm residual):
//!   X ← X + MHA(LN₁(X)) · Wo
//!   X ← X + W₂ · relu(W₁ · LN₂(X) + b₁) + b₂
//! then the `T` tokens of each row are mean-pooled and mapped to 2 logits.

use super::params::ModelParams;
use super::TrainError;
use crate::data::Dataset;
use crate::linalg::{add_row_bias, gemm_acc, gemm_nt_acc, gemm_tn_acc, sum_rows_acc};

/// Variance floor inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-8;

pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    softmax_in_place(&mut out);
    out
}

struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn norm_forward(x: &[f64], gain: &[f64], bias: &[f64]) -> (Vec<f64>, NormCache) {
    let d = gain.len();
    let rows = x.len() / d;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(inv);
        for c in 0..d {
            let h = (row[c] - mean) * inv;
            xhat[r * d + c] = h;
            y[r * d + c] = gain[c] * h + bias[c];
        }
    }
    (y, NormCache { xhat, inv_std })
}

/// Adds the input gradient into `dx`; returns gain and bias gradients.
fn norm_backward(dy: &[f64], cache: &NormCache, gain: &[f64], dx: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let d = gain.len();
    let mut dgain = vec![0.0; d];
    let mut dbias = vec![0.0; d];
    let mut dxhat = vec![0.0; d];
    for (r, &inv) in cache.inv_std.iter().enumerate() {
        let dy_row = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for c in 0..d {
            dgain[c] += dy_row[c] * xh[c];
            dbias[c] += dy_row[c];
            dxhat[c] = dy_row[c] * gain[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xh[c];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        let out = &mut dx[r * d..(r + 1) * d];
        for c in 0..d {
            out[c] += inv * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    (dgain, dbias)
}

/// Layer normalization of one token: `gain ⊙ (x − mean)/√(var + ε) + bias`.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    norm_forward(x, gain, bias).0
}

/// Scaled dot-product attention over every row and head. Returns the
/// attention weights `(B, H, T, T)` and the concatenated head outputs.
fn attention_forward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    batch: usize,
    tokens: usize,
    d: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut attn = vec![0.0; batch * heads * tokens * tokens];
    let mut ctx = vec![0.0; batch * tokens * d];
    for b in 0..batch {
        let base = b * tokens;
        for h in 0..heads {
            let col = h * dh;
            let block = &mut attn[(b * heads + h) * tokens * tokens..][..tokens * tokens];
            for i in 0..tokens {
                let qi = &q[(base + i) * d + col..][..dh];
                let scores = &mut block[i * tokens..(i + 1) * tokens];
                for (j, s) in scores.iter_mut().enumerate() {
                    let kj = &k[(base + j) * d + col..][..dh];
                    *s = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_in_place(scores);
                let ci = &mut ctx[(base + i) * d + col..][..dh];
                for (j, &w) in scores.iter().enumerate() {
                    let vj = &v[(base + j) * d + col..][..dh];
                    for (c, &vv) in ci.iter_mut().zip(vj) {
                        *c += w * vv;
                    }
                }
            }
        }
    }
    (attn, ctx)
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    dctx: &[f64],
    attn: &[f64],
    q: &[f64],
    k: &[f64],
    v: &[f64],
    batch: usize,
    tokens: usize,
    d: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = vec![0.0; dctx.len()];
    let mut dk = vec![0.0; dctx.len()];
    let mut dv = vec![0.0; dctx.len()];
    let mut da = vec![0.0; tokens];
    for b in 0..batch {
        let base = b * tokens;
        for h in 0..heads {
            let col = h * dh;
            let block = &attn[(b * heads + h) * tokens * tokens..][..tokens * tokens];
            for i in 0..tokens {
                let a = &block[i * tokens..(i + 1) * tokens];
                let dci = &dctx[(base + i) * d + col..][..dh];
                for j in 0..tokens {
                    let off = (base + j) * d + col;
                    da[j] = dci.iter().zip(&v[off..off + dh]).map(|(x, y)| x * y).sum();
                    for (g, &dc) in dv[off..off + dh].iter_mut().zip(dci) {
                        *g += a[j] * dc;
                    }
                }
                let centre: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
                let qi_off = (base + i) * d + col;
                for j in 0..tokens {
                    let ds = a[j] * (da[j] - centre) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kj_off = (base + j) * d + col;
                    for c in 0..dh {
                        dq[qi_off + c] += ds * k[kj_off + c];
                        dk[kj_off + c] += ds * q[qi_off + c];
                    }
                }
            }
        }
    }
    (dq, dk, dv)
}

fn embed_batch(params: &ModelParams, inputs: &[f64]) -> Vec<f64> {
    let (t, d) = (params.shape.n_features, params.shape.d_model);
    let scale = params.tensor(params.layout.emb_scale);
    let shift = params.tensor(params.layout.emb_shift);
    let mut x = vec![0.0; inputs.len() * d];
    for (tok, &value) in inputs.iter().enumerate() {
        let f = tok % t;
        let out = &mut x[tok * d..(tok + 1) * d];
        for c in 0..d {
            out[c] = value * scale[f * d + c] + shift[f * d + c] + params.positional[f * d + c];
        }
    }
    x
}

/// Token matrix (`n_features × d_model`) for one row:
/// `token_i = value_i · scale_i + shift_i + PE_i`.
pub fn embed(params: &ModelParams, row: &[f64]) -> Vec<f64> {
    assert_eq!(row.len(), params.shape.n_features, "row width");
    embed_batch(params, row)
}

/// Multi-head self-attention of `layer` applied to one token matrix, without
/// normalization or residual: returns the output-projected context and the
/// attention weights `(H, T, T)`.
pub fn multi_head_attention(params: &ModelParams, layer: usize, tokens: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = params.shape;
    let (t, d) = (s.n_features, s.d_model);
    assert_eq!(tokens.len(), t * d, "token matrix shape");
    let spans = &params.layout.layers[layer];
    let project = |w| {
        let mut out = vec![0.0; t * d];
        gemm_acc(&mut out, tokens, params.tensor(w), t, d, d);
        out
    };
    let (q, k, v) = (project(spans.wq), project(spans.wk), project(spans.wv));
    let (attn, ctx) = attention_forward(&q, &k, &v, 1, t, d, s.n_heads);
    let mut out = vec![0.0; t * d];
    gemm_acc(&mut out, &ctx, params.tensor(spans.wo), t, d, d);
    (out, attn)
}

struct LayerCache {
    norm1: NormCache,
    h1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<f64>,
    ctx: Vec<f64>,
    norm2: NormCache,
    h2: Vec<f64>,
    pre_relu: Vec<f64>,
    hidden: Vec<f64>,
}

/// Result of [`forward`], holding what the reverse pass needs.
pub struct ForwardPass {
    batch: usize,
    inputs: Vec<f64>,
    layers: Vec<LayerCache>,
    pooled: Vec<f64>,
    logits: Vec<f64>,
}

impl ForwardPass {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Smallest `|z|` over all feed-forward pre-activations: how close the
    /// pass is to a ReLU kink, where the loss is not differentiable.
    pub fn relu_margin(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.pre_relu.iter())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }

    /// `batch × 2` logits, row-major.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Attention weights of `layer`, shaped `(batch, heads, T, T)`.
    pub fn attention(&self, layer: usize) -> &[f64] {
        &self.layers[layer].attn
    }

    /// Mean-pooled final tokens, `batch × d_model`.
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }
}

/// Run the encoder on `inputs`, a row-major `batch × n_features` block.
pub fn forward(params: &ModelParams, inputs: &[f64]) -> ForwardPass {
    let s = params.shape;
    let (t, d, f) = (s.n_features, s.d_model, s.d_ff);
    assert_eq!(inputs.len() % t, 0, "input width");
    let batch = inputs.len() / t;
    let n = batch * t;

    let mut x = embed_batch(params, inputs);
    let mut layers = Vec::with_capacity(s.n_layers);
    for spans in &params.layout.layers {
        let (h1, norm1) = norm_forward(&x, params.tensor(spans.ln1_gain), params.tensor(spans.ln1_bias));
        let project = |w| {
            let mut out = vec![0.0; n * d];
            gemm_acc(&mut out, &h1, params.tensor(w), n, d, d);
            out
        };
        let (q, k, v) = (project(spans.wq), project(spans.wk), project(spans.wv));
        let (attn, ctx) = attention_forward(&q, &k, &v, batch, t, d, s.n_heads);
        gemm_acc(&mut x, &ctx, params.tensor(spans.wo), n, d, d);

        let (h2, norm2) = norm_forward(&x, params.tensor(spans.ln2_gain), params.tensor(spans.ln2_bias));
        let mut pre_relu = vec![0.0; n * f];
        gemm_acc(&mut pre_relu, &h2, params.tensor(spans.ff1_w), n, d, f);
        add_row_bias(&mut pre_relu, params.tensor(spans.ff1_b));
        let hidden: Vec<f64> = pre_relu.iter().map(|&z| z.max(0.0)).collect();
        gemm_acc(&mut x, &hidden, params.tensor(spans.ff2_w), n, f, d);
        add_row_bias(&mut x, params.tensor(spans.ff2_b));

        layers.push(LayerCache {
            norm1,
            h1,
            q,
            k,
            v,
            attn,
            ctx,
            norm2,
            h2,
            pre_relu,
            hidden,
        });
    }

    let mut pooled = vec![0.0; batch * d];
    for b in 0..batch {
        let out = &mut pooled[b * d..(b + 1) * d];
        for tok in x[b * t * d..(b + 1) * t * d].chunks_exact(d) {
            for (p, &v) in out.iter_mut().zip(tok) {
                *p += v;
            }
        }
        for p in out.iter_mut() {
            *p /= t as f64;
        }
    }
    let mut logits = vec![0.0; batch * 2];
    gemm_acc(&mut logits, &pooled, params.tensor(params.layout.head_w), batch, d, 2);
    add_row_bias(&mut logits, params.tensor(params.layout.head_b));

    ForwardPass {
        batch,
        inputs: inputs.to_vec(),
        layers,
        pooled,
        logits,
    }
}

/// Reverse pass: gradients of `Σ dlogits ⊙ logits` with respect to every
/// trainable parameter, in the parameter layout.
pub fn backward(params: &ModelParams, pass: &ForwardPass, dlogits: &[f64]) -> Vec<f64> {
    let s = params.shape;
    let (t, d, f) = (s.n_features, s.d_model, s.d_ff);
    let batch = pass.batch;
    let n = batch * t;
    let layout = &params.layout;
    let mut grads = vec![0.0; layout.total()];
    assert_eq!(dlogits.len(), batch * 2, "dlogits shape");

    gemm_tn_acc(&mut grads[layout.head_w.range()], &pass.pooled, dlogits, batch, d, 2);
    sum_rows_acc(&mut grads[layout.head_b.range()], dlogits);
    let mut dpooled = vec![0.0; batch * d];
    gemm_nt_acc(&mut dpooled, dlogits, params.tensor(layout.head_w), batch, 2, d);

    let mut dx = vec![0.0; n * d];
    for (tok, out) in dx.chunks_exact_mut(d).enumerate() {
        let src = &dpooled[(tok / t) * d..(tok / t + 1) * d];
        for (o, &g) in out.iter_mut().zip(src) {
            *o = g / t as f64;
        }
    }

    for (spans, cache) in layout.layers.iter().zip(&pass.layers).rev() {
        // feed-forward block
        gemm_tn_acc(&mut grads[spans.ff2_w.range()], &cache.hidden, &dx, n, f, d);
        sum_rows_acc(&mut grads[spans.ff2_b.range()], &dx);
        let mut dz = vec![0.0; n * f];
        gemm_nt_acc(&mut dz, &dx, params.tensor(spans.ff2_w), n, d, f);
        for (g, &z) in dz.iter_mut().zip(&cache.pre_relu) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        gemm_tn_acc(&mut grads[spans.ff1_w.range()], &cache.h2, &dz, n, d, f);
        sum_rows_acc(&mut grads[spans.ff1_b.range()], &dz);
        let mut dh2 = vec![0.0; n * d];
        gemm_nt_acc(&mut dh2, &dz, params.tensor(spans.ff1_w), n, f, d);
        let (dg, db) = norm_backward(&dh2, &cache.norm2, params.tensor(spans.ln2_gain), &mut dx);
        add_into(&mut grads[spans.ln2_gain.range()], &dg);
        add_into(&mut grads[spans.ln2_bias.range()], &db);

        // attention block
        gemm_tn_acc(&mut grads[spans.wo.range()], &cache.ctx, &dx, n, d, d);
        let mut dctx = vec![0.0; n * d];
        gemm_nt_acc(&mut dctx, &dx, params.tensor(spans.wo), n, d, d);
        let (dq, dk, dv) = attention_backward(&dctx, &cache.attn, &cache.q, &cache.k, &cache.v, batch, t, d, s.n_heads);
        let mut dh1 = vec![0.0; n * d];
        for (w, g) in [(spans.wq, &dq), (spans.wk, &dk), (spans.wv, &dv)] {
            gemm_tn_acc(&mut grads[w.range()], &cache.h1, g, n, d, d);
            gemm_nt_acc(&mut dh1, g, params.tensor(w), n, d, d);
        }
        let (dg, db) = norm_backward(&dh1, &cache.norm1, params.tensor(spans.ln1_gain), &mut dx);
        add_into(&mut grads[spans.ln1_gain.range()], &dg);
        add_into(&mut grads[spans.ln1_bias.range()], &db);
    }

    let (scale_off, shift_off) = (layout.emb_scale.offset, layout.emb_shift.offset);
    for (tok, &value) in pass.inputs.iter().enumerate() {
        let feat = tok % t;
        for c in 0..d {
            let g = dx[tok * d + c];
            grads[scale_off + feat * d + c] += value * g;
            grads[shift_off + feat * d + c] += g;
        }
    }
    grads
}

fn add_into(acc: &mut [f64], src: &[f64]) {
    for (a, &s) in acc.iter_mut().zip(src) {
        *a += s;
    }
}

/// Mean softmax cross-entropy over a batch and its gradient with respect to
/// the logits.
pub fn cross_entropy(logits: &[f64], labels: &[u8]) -> (f64, Vec<f64>) {
    let batch = labels.len();
    let mut loss = 0.0;
    let mut dlogits = vec![0.0; logits.len()];
    for (b, &y) in labels.iter().enumerate() {
        let l = &logits[b * 2..b * 2 + 2];
        let m = l[0].max(l[1]);
        let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
        loss += lse - l[y as usize];
        for c in 0..2 {
            let p = (l[c] - lse).exp();
            dlogits[b * 2 + c] = (p - if c == y as usize { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    (loss / batch as f64, dlogits)
}

/// Mean cross-entropy over the batch and its parameter gradients.
pub fn loss_and_gradients(params: &ModelParams, inputs: &[f64], labels: &[u8]) -> Result<(f64, Vec<f64>), TrainError> {
    if labels.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if inputs.len() != labels.len() * params.shape.n_features {
        return Err(TrainError::Shape(format!(
            "{} inputs for {} labels of width {}",
            inputs.len(),
            labels.len(),
            params.shape.n_features
        )));
    }
    let pass = forward(params, inputs);
    let (loss, dlogits) = cross_entropy(pass.logits(), labels);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss);
    }
    Ok((loss, backward(params, &pass, &dlogits)))
}

/// Class probabilities from a pair of logits.
pub fn class_probabilities(logits: [f64; 2]) -> [f64; 2] {
    let p = softmax(&logits);
    [p[0], p[1]]
}

/// Argmax with ties going to class 0.
pub fn label_from_logits(logits: [f64; 2]) -> u8 {
    u8::from(logits[1] > logits[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<u8>,
    pub probabilities: Vec<[f64; 2]>,
}

/// Labels and class probabilities for every row; rows are independent.
pub fn predict(params: &ModelParams, data: &Dataset) -> Predictions {
    const CHUNK: usize = 256;
    let width = data.n_features();
    assert_eq!(width, params.shape.n_features, "dataset width");
    let mut labels = Vec::with_capacity(data.n_rows());
    let mut probabilities = Vec::with_capacity(data.n_rows());
    for block in data.features().chunks(CHUNK * width) {
        let pass = forward(params, block);
        for l in pass.logits().chunks_exact(2) {
            let pair = [l[0], l[1]];
            labels.push(label_from_logits(pair));
            probabilities.push(class_probabilities(pair));
        }
    }
    Predictions { labels, probabilities }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transformer::config::ModelShape;

    fn small(t: usize, d: usize, heads: usize, layers: usize) -> ModelParams {
        ModelParams::init(
            ModelShape {
                n_features: t,
                d_model: d,
                n_heads: heads,
                d_ff: 2 * d,
                n_layers: layers,
            },
            17,
        )
    }

    #[test]
    fn zero_value_isolates_shift_and_position() {
        let p = small(13, 8, 2, 1);
        let mut row = vec![0.7; 13];
        row[4] = 0.0;
        let tokens = embed(&p, &row);
        let shift = p.tensor(p.layout.emb_shift);
        for c in 0..8 {
            assert_eq!(tokens[4 * 8 + c], shift[4 * 8 + c] + p.positional[4 * 8 + c]);
        }
    }

    #[test]
    fn embedding_is_per_feature() {
        let p = small(13, 8, 2, 1);
        let a = vec![0.3; 13];
        let mut b = a.clone();
        b[6] = -1.2;
        let (ta, tb) = (embed(&p, &a), embed(&p, &b));
        for tok in 0..13 {
            let same = ta[tok * 8..(tok + 1) * 8] == tb[tok * 8..(tok + 1) * 8];
            assert_eq!(same, tok != 6);
        }
    }

    #[test]
    fn constant_scores_give_uniform_attention() {
        let mut p = small(13, 8, 2, 1);
        // zero key projection: all scores equal
        let wk = p.layout.layers[0].wk;
        p.tensor_mut(wk).fill(0.0);
        let tokens = embed(&p, &[0.5; 13]);
        let (_, attn) = multi_head_attention(&p, 0, &tokens);
        for w in attn {
            assert!((w - 1.0 / 13.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_saturates() {
        let mut scores = vec![0.0; 13];
        scores[3] = 20.0;
        let w = softmax(&scores);
        // e^20 / (e^20 + 12)
        let expected = 1.0 / (1.0 + 12.0 * (-20f64).exp());
        assert!((w[3] - expected).abs() < 1e-15);
        assert!(w[3] > 0.999);
    }

    #[test]
    fn layer_norm_standardizes() {
        let x = [3.0, -1.0, 0.5, 2.0, 7.0, -4.0];
        let y = layer_norm(&x, &[1.0; 6], &[0.0; 6]);
        let mean = y.iter().sum::<f64>() / 6.0;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_head_weights_return_bias() {
        let mut p = small(13, 8, 2, 1);
        let (hw, hb) = (p.layout.head_w, p.layout.head_b);
        p.tensor_mut(hw).fill(0.0);
        p.tensor_mut(hb).copy_from_slice(&[0.25, -1.5]);
        let inputs: Vec<f64> = (0..26).map(|i| (i as f64).sin()).collect();
        let pass = forward(&p, &inputs);
        assert_eq!(pass.logits(), &[0.25, -1.5, 0.25, -1.5]);
    }

    #[test]
    fn uniform_logits_loss_is_ln2() {
        let (loss, dl) = cross_entropy(&[0.0, 0.0], &[0]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(dl, vec![-0.5, 0.5]);
    }

    #[test]
    fn prediction_rules() {
        assert_eq!(label_from_logits([3.0, -1.0]), 0);
        let p = class_probabilities([3.0, -1.0]);
        assert!((p[0] - 1.0 / (1.0 + (-4f64).exp())).abs() < 1e-15);
        assert!((p[0] - 0.9820).abs() < 5e-5);
        assert_eq!(label_from_logits([0.4, 0.4]), 0);
        assert_eq!(label_from_logits([0.4, 0.5]), 1);
    }

    #[test]
    fn batched_forward_matches_row_by_row() {
        let p = small(5, 8, 4, 2);
        let inputs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).cos()).collect();
        let whole = forward(&p, &inputs);
        for r in 0..3 {
            let single = forward(&p, &inputs[r * 5..(r + 1) * 5]);
            for c in 0..2 {
                assert!((single.logits()[c] - whole.logits()[r * 2 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let p = small(5, 4, 1, 1);
        assert!(matches!(loss_and_gradients(&p, &[], &[]), Err(TrainError::EmptyBatch)));
    }
}
