/// Bias-corrected Adam over a fixed list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Moments sized after `shapes` (element counts per tensor).
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes
            .into_iter()
            .map(|n| (vec![0.0; n], vec![0.0; n]))
            .unzip();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    pub fn for_tensors(tensors: &[&[f64]]) -> Self {
        Self::new(tensors.iter().map(|t| t.len()))
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) {
        assert_eq!(params.len(), self.m.len(), "tensor count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            assert_eq!(p.len(), m.len());
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Learning rate multiplied by `gamma` every `step` epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub base: f64,
    pub step: usize,
    pub gamma: f64,
}

impl StepSchedule {
    /// Rate used during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.base * self.gamma.powi((epoch / self.step.max(1)) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new([2]);
        s.update(vec![&mut p], vec![&[0.0, 0.0]], 0.1);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let g = [3.5, -0.02, 1e-3];
        let mut s = AdamState::new([3]);
        s.update(vec![&mut p], vec![&g], 0.01);
        for (pi, gi) in p.iter().zip(g) {
            // |g| / (|g| + eps) is 1 up to eps / |g|
            assert!((pi + 0.01 * gi.signum()).abs() < 0.01 * 1e-8 / gi.abs() + 1e-15);
        }
    }

    #[test]
    fn quadratic_descends_after_warmup() {
        let target = [1.0, -2.0, 0.5, 3.0];
        let loss = |p: &[f64]| p.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut p = vec![0.0; 4];
        let mut s = AdamState::new([4]);
        let mut losses = Vec::new();
        for _ in 0..100 {
            let g: Vec<f64> = p.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
            s.update(vec![&mut p], vec![&g], 0.01);
            losses.push(loss(&p));
        }
        for w in losses[5..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn schedule_decays_every_step_epochs() {
        let s = StepSchedule {
            base: 5e-4,
            step: 3,
            gamma: 0.1,
        };
        assert_eq!(s.lr_at(0), 5e-4);
        assert_eq!(s.lr_at(2), 5e-4);
        // seventh epoch, two decays applied
        assert!((s.lr_at(6) - 5e-6).abs() < 1e-18);
    }
}
