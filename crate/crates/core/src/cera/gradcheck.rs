//! Central finite-difference check of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;

use super::backward::loss_and_grad;
use super::forward::{cosine_loss, forward, normalize_inputs, ClusterInputs};
use super::params::{CeraParams, Variant, DEFAULT_POSITIONS};

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub sentences: usize,
    pub dim: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub variants: Vec<Variant>,
    /// Scales one analytic gradient tensor, to prove the check can fail.
    pub corrupt: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            instances: 5,
            sentences: 6,
            dim: 16,
            eps: 1e-4,
            tolerance: 1e-3,
            seed: 0,
            variants: vec![Variant::Cera, Variant::Cerai],
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub variant: Variant,
    pub instance: usize,
    pub tensor: &'static str,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub checks: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.max_rel_error < self.tolerance)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Elementwise relative error; the floor keeps exact zeros from dividing
/// by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// A random cluster split over up to three documents, its gold centroid and
/// a parameter set with every tensor perturbed away from initialization.
pub fn random_instance(
    rng: &mut impl Rng,
    sentences: usize,
    dim: usize,
    variant: Variant,
) -> (ClusterInputs, Vec<f64>, CeraParams) {
    let n_docs = sentences.clamp(1, 3);
    let mut doc_sizes = vec![1; n_docs];
    for _ in n_docs..sentences {
        doc_sizes[rng.gen_range(0..n_docs)] += 1;
    }
    let mut raw = Vec::new();
    let mut positions = Vec::new();
    let mut pool_weights = Vec::new();
    for &size in &doc_sizes {
        let mut pos = 0;
        for _ in 0..size {
            raw.push((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
            positions.push(pos);
            pool_weights.push(1.0 / (n_docs * size) as f64);
            // gaps mimic filtered sentences; occasionally past the table
            pos += rng.gen_range(1..4) + if rng.gen_bool(0.1) { 40 } else { 0 };
        }
    }
    let inputs = ClusterInputs {
        embeddings: normalize_inputs(&raw).expect("random vectors are nonzero"),
        positions,
        pool_weights,
    };
    let gold: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut params = CeraParams::init(dim, DEFAULT_POSITIONS, variant, rng);
    for t in params.slices_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    (inputs, gold, params)
}

fn loss_at(inputs: &ClusterInputs, gold: &[f64], params: &CeraParams) -> Result<f64> {
    cosine_loss(&forward(inputs, params)?.0, gold)
}

/// Compares every tensor of the analytic gradient against central
/// differences.
pub fn check_instance(
    inputs: &ClusterInputs,
    gold: &[f64],
    params: &CeraParams,
    eps: f64,
    corrupt: bool,
) -> Result<Vec<(&'static str, f64, f64)>> {
    let (_, mut grads) = loss_and_grad(inputs, gold, params)?;
    if corrupt {
        for g in grads.scorer_w1.iter_mut() {
            *g *= 1.5;
        }
    }
    let names = params.names();
    let analytic = grads.slices();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(names.len());
    for (t, name) in names.iter().enumerate() {
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for (j, &a) in analytic[t].iter().enumerate() {
            let original = probe.slices()[t][j];
            probe.slices_mut()[t][j] = original + eps;
            let plus = loss_at(inputs, gold, &probe)?;
            probe.slices_mut()[t][j] = original - eps;
            let minus = loss_at(inputs, gold, &probe)?;
            probe.slices_mut()[t][j] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max((a - numeric).abs());
        }
        out.push((*name, max_rel, max_abs));
    }
    Ok(out)
}

pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut checks = Vec::new();
    for &variant in &config.variants {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for instance in 0..config.instances {
            let (inputs, gold, params) =
                random_instance(&mut rng, config.sentences, config.dim, variant);
            for (tensor, max_rel_error, max_abs_error) in
                check_instance(&inputs, &gold, &params, config.eps, config.corrupt)?
            {
                checks.push(TensorCheck {
                    variant,
                    instance,
                    tensor,
                    max_rel_error,
                    max_abs_error,
                });
            }
        }
    }
    Ok(GradcheckReport {
        tolerance: config.tolerance,
        checks,
    })
}
