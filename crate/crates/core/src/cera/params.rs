use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows in the positional table; later positions share the last row.
pub const DEFAULT_POSITIONS: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Attention-pooled centroid.
    Cera,
    /// Attention-pooled centroid gated against the mean-pool centroid.
    Cerai,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cera => "cera",
            Variant::Cerai => "cerai",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cera" => Ok(Variant::Cera),
            "cerai" => Ok(Variant::Cerai),
            other => Err(Error::InvalidConfig(format!("unknown model variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Interpolation gate: `sigmoid(v2 · relu(v1 · [c_attn; mean] + c1) + c2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpParams {
    /// d × 2d
    pub v1: Vec<f64>,
    pub c1: Vec<f64>,
    /// d × d
    pub v2: Vec<f64>,
    pub c2: Vec<f64>,
}

/// All learnable tensors. Matrices are row-major, `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct CeraParams {
    pub dim: usize,
    pub n_positions: usize,
    /// n_positions × d
    pub positions: Vec<f64>,
    /// d × 2d
    pub scorer_w1: Vec<f64>,
    pub scorer_b1: Vec<f64>,
    /// 1 × d
    pub scorer_w2: Vec<f64>,
    pub scorer_b2: Vec<f64>,
    /// d × d
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
    pub ln_in_gain: Vec<f64>,
    pub ln_in_bias: Vec<f64>,
    pub ln_h_gain: Vec<f64>,
    pub ln_h_bias: Vec<f64>,
    pub interp: Option<InterpParams>,
}

fn uniform(rng: &mut impl Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl CeraParams {
    /// Weights uniform in ±1/sqrt(fan_in), biases and positions zero, layer
    /// norm gains one.
    pub fn init(dim: usize, n_positions: usize, variant: Variant, rng: &mut impl Rng) -> Self {
        let d = dim;
        let scorer_w1 = uniform(rng, d * 2 * d, 2 * d);
        let scorer_w2 = uniform(rng, d, d);
        let out_w = uniform(rng, d * d, d);
        let interp = match variant {
            Variant::Cera => None,
            Variant::Cerai => Some(InterpParams {
                v1: uniform(rng, d * 2 * d, 2 * d),
                c1: vec![0.0; d],
                v2: uniform(rng, d * d, d),
                c2: vec![0.0; d],
            }),
        };
        CeraParams {
            dim: d,
            n_positions,
            positions: vec![0.0; n_positions * d],
            scorer_w1,
            scorer_b1: vec![0.0; d],
            scorer_w2,
            scorer_b2: vec![0.0],
            out_w,
            out_b: vec![0.0; d],
            ln_in_gain: vec![1.0; d],
            ln_in_bias: vec![0.0; d],
            ln_h_gain: vec![1.0; d],
            ln_h_bias: vec![0.0; d],
            interp,
        }
    }

    pub fn variant(&self) -> Variant {
        if self.interp.is_some() {
            Variant::Cerai
        } else {
            Variant::Cera
        }
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.slices_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Tensor names, in the fixed order used by `slices` and checkpoints.
    pub fn names(&self) -> Vec<&'static str> {
        let mut names = vec![
            "positions",
            "scorer.w1",
            "scorer.b1",
            "scorer.w2",
            "scorer.b2",
            "out.w",
            "out.b",
            "ln_in.gain",
            "ln_in.bias",
            "ln_h.gain",
            "ln_h.bias",
        ];
        if self.interp.is_some() {
            names.extend(["interp.v1", "interp.c1", "interp.v2", "interp.c2"]);
        }
        names
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let d = self.dim;
        let mut shapes = vec![
            vec![self.n_positions, d],
            vec![d, 2 * d],
            vec![d],
            vec![1, d],
            vec![1],
            vec![d, d],
            vec![d],
            vec![d],
            vec![d],
            vec![d],
            vec![d],
        ];
        if self.interp.is_some() {
            shapes.extend([vec![d, 2 * d], vec![d], vec![d, d], vec![d]]);
        }
        shapes
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![
            &self.positions,
            &self.scorer_w1,
            &self.scorer_b1,
            &self.scorer_w2,
            &self.scorer_b2,
            &self.out_w,
            &self.out_b,
            &self.ln_in_gain,
            &self.ln_in_bias,
            &self.ln_h_gain,
            &self.ln_h_bias,
        ];
        if let Some(i) = &self.interp {
            out.extend([i.v1.as_slice(), &i.c1, &i.v2, &i.c2]);
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.positions,
            &mut self.scorer_w1,
            &mut self.scorer_b1,
            &mut self.scorer_w2,
            &mut self.scorer_b2,
            &mut self.out_w,
            &mut self.out_b,
            &mut self.ln_in_gain,
            &mut self.ln_in_bias,
            &mut self.ln_h_gain,
            &mut self.ln_h_bias,
        ];
        if let Some(i) = &mut self.interp {
            out.extend([
                i.v1.as_mut_slice(),
                i.c1.as_mut_slice(),
                i.v2.as_mut_slice(),
                i.c2.as_mut_slice(),
            ]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &CeraParams) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            crate::vector::axpy(a, alpha, b);
        }
    }

    /// Every value narrowed to f32 and widened back, as stored on disk.
    pub fn rounded_to_f32(&self) -> Self {
        let mut p = self.clone();
        for t in p.slices_mut() {
            for v in t.iter_mut() {
                *v = f64::from(*v as f32);
            }
        }
        p
    }
}
