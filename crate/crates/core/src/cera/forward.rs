//! Forward pass of the centroid regressor.
//!
//! ```text
//! u_k   = LN_in(x_k) + P[min(pos_k, rows-1)]
//! m     = two-stage mean of u over documents
//! s_k   = w2 · tanh(W1 [u_k; m] + b1) + b2
//! beta  = softmax(s)
//! h     = sum_k beta_k x_k
//! c_att = Wo LN_h(h) + bo
//! ```
//!
//! `x_k` are the unit-normalized sentence embeddings. The gated variant
//! blends `c_att` with the mean-pool of `x` through an elementwise gate.

use crate::corpus::Cluster;
use crate::error::{Error, Result};
use crate::vector;

use super::params::{CeraParams, Variant};

pub(crate) const LN_EPS: f64 = 1e-5;

/// Scales every embedding to unit L2 norm.
pub fn normalize_inputs(embeddings: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    embeddings
        .iter()
        .map(|e| {
            let n = vector::norm(e);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroNorm("sentence embedding"));
            }
            Ok(e.iter().map(|v| v / n).collect())
        })
        .collect()
}

/// Model-ready view of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInputs {
    /// Unit-normalized embeddings in global sentence order.
    pub embeddings: Vec<Vec<f64>>,
    pub positions: Vec<usize>,
    /// Weight of each sentence in the document-then-cluster mean.
    pub pool_weights: Vec<f64>,
}

impl ClusterInputs {
    pub fn from_cluster(cluster: &Cluster) -> Result<Self> {
        if cluster.is_empty() {
            return Err(Error::EmptyCluster(cluster.id.clone()));
        }
        let raw: Vec<Vec<f64>> = cluster.sentences().map(|s| s.embedding.clone()).collect();
        let n_docs = cluster.documents.iter().filter(|d| !d.is_empty()).count() as f64;
        let pool_weights = cluster
            .documents
            .iter()
            .flat_map(|doc| {
                let w = 1.0 / (n_docs * doc.len() as f64);
                doc.iter().map(move |_| w)
            })
            .collect();
        Ok(ClusterInputs {
            embeddings: normalize_inputs(&raw)?,
            positions: cluster.sentences().map(|s| s.pos_in_doc).collect(),
            pool_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, Vec::len)
    }

    /// Document-then-cluster mean of the normalized embeddings.
    pub fn mean_pool(&self) -> Vec<f64> {
        weighted_sum(&self.pool_weights, &self.embeddings, self.dim())
    }
}

/// Intermediates of the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpTrace {
    /// [c_att; mean]
    pub features: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Everything the backward pass needs, and more for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub inputs: ClusterInputs,
    pub ln_in_hat: Vec<Vec<f64>>,
    pub ln_in_inv_std: Vec<f64>,
    pub position_rows: Vec<usize>,
    pub e_pos: Vec<Vec<f64>>,
    pub pooled_pos: Vec<f64>,
    /// scorer hidden activations after tanh
    pub scorer_hidden: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub beta: Vec<f64>,
    pub h: Vec<f64>,
    pub ln_h_hat: Vec<f64>,
    pub ln_h_inv_std: f64,
    pub ln_h_out: Vec<f64>,
    pub c_attn: Vec<f64>,
    pub mean_pool: Vec<f64>,
    pub interp: Option<InterpTrace>,
    pub output: Vec<f64>,
}

/// `W x` for a row-major `rows × cols` matrix.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    (0..rows)
        .map(|r| vector::dot(&w[r * cols..(r + 1) * cols], x))
        .collect()
}

fn weighted_sum(weights: &[f64], rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for (w, r) in weights.iter().zip(rows) {
        vector::axpy(&mut acc, *w, r);
    }
    acc
}

/// Returns (output, normalized input, 1/std).
pub(crate) fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    let hat: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let out = hat
        .iter()
        .zip(gain)
        .zip(bias)
        .map(|((h, g), b)| h * g + b)
        .collect();
    (out, hat, inv_std)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check(stage: &str, v: &[f64]) -> Result<()> {
    if vector::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NonFinite(stage.to_string()))
    }
}

/// Predicted centroid for one cluster, plus the full trace.
pub fn forward(inputs: &ClusterInputs, params: &CeraParams) -> Result<(Vec<f64>, ForwardTrace)> {
    let n = inputs.len();
    if n == 0 {
        return Err(Error::EmptyInput("forward pass over zero sentences"));
    }
    let d = params.dim;
    if inputs.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: inputs.dim(),
            context: "model input".into(),
        });
    }

    let mut ln_in_hat = Vec::with_capacity(n);
    let mut ln_in_inv_std = Vec::with_capacity(n);
    let mut position_rows = Vec::with_capacity(n);
    let mut e_pos = Vec::with_capacity(n);
    for (x, &pos) in inputs.embeddings.iter().zip(&inputs.positions) {
        let (mut u, hat, inv_std) = layer_norm(x, &params.ln_in_gain, &params.ln_in_bias);
        let row = pos.min(params.n_positions - 1);
        vector::add_assign(&mut u, &params.positions[row * d..(row + 1) * d]);
        ln_in_hat.push(hat);
        ln_in_inv_std.push(inv_std);
        position_rows.push(row);
        e_pos.push(u);
    }
    for u in &e_pos {
        check("positional input", u)?;
    }
    let pooled_pos = weighted_sum(&inputs.pool_weights, &e_pos, d);

    let mut scorer_hidden = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    let mut features = vec![0.0; 2 * d];
    features[d..].copy_from_slice(&pooled_pos);
    for u in &e_pos {
        features[..d].copy_from_slice(u);
        let mut a = matvec(&params.scorer_w1, d, 2 * d, &features);
        for (v, b) in a.iter_mut().zip(&params.scorer_b1) {
            *v = (*v + b).tanh();
        }
        scores.push(vector::dot(&params.scorer_w2, &a) + params.scorer_b2[0]);
        scorer_hidden.push(a);
    }
    check("attention scores", &scores)?;

    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut beta: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = beta.iter().sum();
    vector::scale(&mut beta, 1.0 / z);

    let h = weighted_sum(&beta, &inputs.embeddings, d);
    let (ln_h_out, ln_h_hat, ln_h_inv_std) = layer_norm(&h, &params.ln_h_gain, &params.ln_h_bias);
    let mut c_attn = matvec(&params.out_w, d, d, &ln_h_out);
    vector::add_assign(&mut c_attn, &params.out_b);
    check("attention centroid", &c_attn)?;

    let mean_pool = inputs.mean_pool();
    let (output, interp) = match &params.interp {
        None => (c_attn.clone(), None),
        Some(ip) => {
            let mut q = Vec::with_capacity(2 * d);
            q.extend_from_slice(&c_attn);
            q.extend_from_slice(&mean_pool);
            let mut pre = matvec(&ip.v1, d, 2 * d, &q);
            vector::add_assign(&mut pre, &ip.c1);
            let hidden: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let mut gate = matvec(&ip.v2, d, d, &hidden);
            vector::add_assign(&mut gate, &ip.c2);
            let alpha: Vec<f64> = gate.iter().map(|&g| sigmoid(g)).collect();
            let out = alpha
                .iter()
                .zip(&c_attn)
                .zip(&mean_pool)
                .map(|((a, c), e)| a * c + (1.0 - a) * e)
                .collect();
            (
                out,
                Some(InterpTrace {
                    features: q,
                    hidden_pre: pre,
                    hidden,
                    alpha,
                }),
            )
        }
    };
    check("output centroid", &output)?;

    let trace = ForwardTrace {
        inputs: inputs.clone(),
        ln_in_hat,
        ln_in_inv_std,
        position_rows,
        e_pos,
        pooled_pos,
        scorer_hidden,
        scores,
        beta,
        h,
        ln_h_hat,
        ln_h_inv_std,
        ln_h_out,
        c_attn,
        mean_pool,
        interp,
        output: output.clone(),
    };
    Ok((output, trace))
}

/// Checks `variant` against the parameter set before running [`forward`].
pub fn forward_variant(
    inputs: &ClusterInputs,
    params: &CeraParams,
    variant: Variant,
) -> Result<(Vec<f64>, ForwardTrace)> {
    if params.variant() != variant {
        return Err(Error::VariantMismatch {
            expected: variant.to_string(),
            found: params.variant().to_string(),
        });
    }
    forward(inputs, params)
}

/// Cosine distance `1 - cos(pred, gold)`.
pub fn cosine_loss(pred: &[f64], gold: &[f64]) -> Result<f64> {
    let np = vector::norm(pred);
    let ng = vector::norm(gold);
    if np == 0.0 || ng == 0.0 {
        return Err(Error::ZeroNorm("cosine loss operand"));
    }
    Ok(1.0 - vector::dot(pred, gold) / (np * ng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cera::params::DEFAULT_POSITIONS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inputs(rng: &mut impl Rng, docs: &[usize], d: usize) -> ClusterInputs {
        let n_docs = docs.len() as f64;
        let mut emb = Vec::new();
        let mut pos = Vec::new();
        let mut w = Vec::new();
        for &len in docs {
            for p in 0..len {
                emb.push((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
                pos.push(p);
                w.push(1.0 / (n_docs * len as f64));
            }
        }
        ClusterInputs {
            embeddings: normalize_inputs(&emb).unwrap(),
            positions: pos,
            pool_weights: w,
        }
    }

    #[test]
    fn normalize_closed_form() {
        let out = normalize_inputs(&[vec![3.0, 4.0], vec![0.0, 1.0]]).unwrap();
        assert!((out[0][0] - 0.6).abs() < 1e-15 && (out[0][1] - 0.8).abs() < 1e-15);
        assert_eq!(out[1], vec![0.0, 1.0]);
        assert!(normalize_inputs(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn single_sentence_has_unit_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = inputs(&mut rng, &[1], 8);
        let p = CeraParams::init(8, DEFAULT_POSITIONS, Variant::Cera, &mut rng);
        let (_, t) = forward(&x, &p).unwrap();
        assert_eq!(t.beta, vec![1.0]);
    }

    #[test]
    fn closed_gate_returns_mean_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = inputs(&mut rng, &[3, 2], 8);
        let mut p = CeraParams::init(8, DEFAULT_POSITIONS, Variant::Cerai, &mut rng);
        p.interp.as_mut().unwrap().c2.fill(-60.0);
        let (c, t) = forward(&x, &p).unwrap();
        for (a, b) in c.iter().zip(&t.mean_pool) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn loss_closed_forms() {
        assert!(cosine_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().abs() < 1e-15);
        assert!((cosine_loss(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() - 2.0).abs() < 1e-15);
        let l = cosine_loss(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((l - 0.29289321881345254).abs() < 1e-11);
        assert!(cosine_loss(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn positions_past_table_clamp_to_last_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = inputs(&mut rng, &[2], 4);
        x.positions = vec![0, 80];
        let p = CeraParams::init(4, DEFAULT_POSITIONS, Variant::Cera, &mut rng);
        let (_, t) = forward(&x, &p).unwrap();
        assert_eq!(t.position_rows, vec![0, 34]);
    }

    #[test]
    fn variant_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = inputs(&mut rng, &[2], 4);
        let p = CeraParams::init(4, DEFAULT_POSITIONS, Variant::Cera, &mut rng);
        assert!(matches!(
            forward_variant(&x, &p, Variant::Cerai),
            Err(Error::VariantMismatch { .. })
        ));
    }
}
