//! Reverse-mode gradients of the cosine loss, derived by hand.

use crate::error::{Error, Result};
use crate::vector;

use super::forward::{cosine_loss, forward, ClusterInputs, ForwardTrace};
use super::params::CeraParams;

/// `g += y xᵀ` for a row-major `y.len() × x.len()` matrix.
fn outer_acc(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr != 0.0 {
            vector::axpy(&mut g[r * cols..(r + 1) * cols], yr, x);
        }
    }
}

/// `Wᵀ y` for a row-major `y.len() × cols` matrix.
fn matvec_t(w: &[f64], cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (r, &yr) in y.iter().enumerate() {
        if yr != 0.0 {
            vector::axpy(&mut out, yr, &w[r * cols..(r + 1) * cols]);
        }
    }
    out
}

/// Gradient through `gain ⊙ hat + bias` back to the layer-norm input.
/// Accumulates gain/bias gradients.
fn layer_norm_backward(
    d_out: &[f64],
    hat: &[f64],
    inv_std: f64,
    gain: &[f64],
    d_gain: &mut [f64],
    d_bias: &mut [f64],
) -> Vec<f64> {
    let n = d_out.len() as f64;
    let mut d_hat = Vec::with_capacity(d_out.len());
    for i in 0..d_out.len() {
        d_gain[i] += d_out[i] * hat[i];
        d_bias[i] += d_out[i];
        d_hat.push(d_out[i] * gain[i]);
    }
    let mean_dhat = d_hat.iter().sum::<f64>() / n;
    let mean_dhat_hat = vector::dot(&d_hat, hat) / n;
    d_hat
        .iter()
        .zip(hat)
        .map(|(dh, h)| inv_std * (dh - mean_dhat - h * mean_dhat_hat))
        .collect()
}

/// d(1 - cos(pred, gold)) / d pred.
pub fn cosine_loss_grad(pred: &[f64], gold: &[f64]) -> Result<Vec<f64>> {
    let np = vector::norm(pred);
    let ng = vector::norm(gold);
    if np == 0.0 || ng == 0.0 {
        return Err(Error::ZeroNorm("cosine loss operand"));
    }
    let cos = vector::dot(pred, gold) / (np * ng);
    Ok(pred
        .iter()
        .zip(gold)
        .map(|(p, g)| -(g / (np * ng) - cos * p / (np * np)))
        .collect())
}

/// Gradients of the cosine loss against `gold` for every parameter tensor.
/// Positional rows that no sentence used get zero gradient.
pub fn backward(trace: &ForwardTrace, gold: &[f64], params: &CeraParams) -> Result<CeraParams> {
    let d = params.dim;
    let n = trace.inputs.len();
    let mut g = params.zeros_like();

    let d_out = cosine_loss_grad(&trace.output, gold)?;

    // gate
    let d_c_attn = match (&params.interp, &trace.interp, &mut g.interp) {
        (Some(ip), Some(it), Some(gi)) => {
            let mut d_c_attn: Vec<f64> = d_out.iter().zip(&it.alpha).map(|(o, a)| o * a).collect();
            let d_gate: Vec<f64> = (0..d)
                .map(|i| {
                    let a = it.alpha[i];
                    d_out[i] * (trace.c_attn[i] - trace.mean_pool[i]) * a * (1.0 - a)
                })
                .collect();
            outer_acc(&mut gi.v2, &d_gate, &it.hidden);
            vector::add_assign(&mut gi.c2, &d_gate);
            let d_hidden = matvec_t(&ip.v2, d, &d_gate);
            let d_pre: Vec<f64> = d_hidden
                .iter()
                .zip(&it.hidden_pre)
                .map(|(dh, p)| if *p > 0.0 { *dh } else { 0.0 })
                .collect();
            outer_acc(&mut gi.v1, &d_pre, &it.features);
            vector::add_assign(&mut gi.c1, &d_pre);
            let d_q = matvec_t(&ip.v1, 2 * d, &d_pre);
            // the mean-pool half of the features is an input constant
            vector::add_assign(&mut d_c_attn, &d_q[..d]);
            d_c_attn
        }
        (None, None, None) => d_out,
        _ => {
            return Err(Error::VariantMismatch {
                expected: params.variant().to_string(),
                found: "trace of the other variant".into(),
            })
        }
    };

    // output projection and its layer norm
    outer_acc(&mut g.out_w, &d_c_attn, &trace.ln_h_out);
    vector::add_assign(&mut g.out_b, &d_c_attn);
    let d_ln_h = matvec_t(&params.out_w, d, &d_c_attn);
    let d_h = layer_norm_backward(
        &d_ln_h,
        &trace.ln_h_hat,
        trace.ln_h_inv_std,
        &params.ln_h_gain,
        &mut g.ln_h_gain,
        &mut g.ln_h_bias,
    );

    // attention pooling and softmax
    let d_beta: Vec<f64> = trace
        .inputs
        .embeddings
        .iter()
        .map(|x| vector::dot(&d_h, x))
        .collect();
    let mean_d_beta = vector::dot(&trace.beta, &d_beta);
    let d_scores: Vec<f64> = trace
        .beta
        .iter()
        .zip(&d_beta)
        .map(|(b, db)| b * (db - mean_d_beta))
        .collect();

    // scorer
    let mut d_e_pos = vec![vec![0.0; d]; n];
    let mut d_pooled = vec![0.0; d];
    let mut features = vec![0.0; 2 * d];
    features[d..].copy_from_slice(&trace.pooled_pos);
    for k in 0..n {
        let ds = d_scores[k];
        let a = &trace.scorer_hidden[k];
        vector::axpy(&mut g.scorer_w2, ds, a);
        g.scorer_b2[0] += ds;
        let d_pre: Vec<f64> = params
            .scorer_w2
            .iter()
            .zip(a)
            .map(|(w, a)| ds * w * (1.0 - a * a))
            .collect();
        features[..d].copy_from_slice(&trace.e_pos[k]);
        outer_acc(&mut g.scorer_w1, &d_pre, &features);
        vector::add_assign(&mut g.scorer_b1, &d_pre);
        let d_feat = matvec_t(&params.scorer_w1, 2 * d, &d_pre);
        vector::add_assign(&mut d_e_pos[k], &d_feat[..d]);
        vector::add_assign(&mut d_pooled, &d_feat[d..]);
    }
    for (k, de) in d_e_pos.iter_mut().enumerate() {
        vector::axpy(de, trace.inputs.pool_weights[k], &d_pooled);
    }

    // positions and input layer norm
    for ((de, &row), hat) in d_e_pos.iter().zip(&trace.position_rows).zip(&trace.ln_in_hat) {
        vector::add_assign(&mut g.positions[row * d..(row + 1) * d], de);
        // input embeddings are constants, only gain and bias matter
        for i in 0..d {
            g.ln_in_gain[i] += de[i] * hat[i];
            g.ln_in_bias[i] += de[i];
        }
    }
    Ok(g)
}

/// Loss and gradients for one cluster.
pub fn loss_and_grad(
    inputs: &ClusterInputs,
    gold: &[f64],
    params: &CeraParams,
) -> Result<(f64, CeraParams)> {
    let (pred, trace) = forward(inputs, params)?;
    let loss = cosine_loss(&pred, gold)?;
    let grads = backward(&trace, gold, params)?;
    Ok((loss, grads))
}
