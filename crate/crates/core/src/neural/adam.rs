use crate::error::{usage, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

/// Moment accumulators mirroring a list of parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    config: AdamConfig,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    /// Zeroed state for parameter blocks of the given lengths.
    pub fn new(block_lengths: &[usize], config: AdamConfig) -> Self {
        AdamState {
            config,
            first: block_lengths.iter().map(|&n| vec![S::zero(); n]).collect(),
            second: block_lengths.iter().map(|&n| vec![S::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut [S]], grads: &[&[S]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return usage(format!(
                "optimizer tracks {} blocks, got {} parameter and {} gradient blocks",
                self.first.len(),
                params.len(),
                grads.len()
            ));
        }
        for (b, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[b].len() || g.len() != self.first[b].len() {
                return usage(format!("block {b}: shape does not match optimizer state"));
            }
        }
        self.step += 1;
        let cfg = self.config;
        let (b1, b2) = (S::lit(cfg.beta1), S::lit(cfg.beta2));
        let (one_b1, one_b2) = (S::lit(1.0 - cfg.beta1), S::lit(1.0 - cfg.beta2));
        let step = i32::try_from(self.step).unwrap_or(i32::MAX);
        let corr1 = S::lit(1.0 - cfg.beta1.powi(step));
        let corr2 = S::lit(1.0 - cfg.beta2.powi(step));
        let (lr, eps) = (S::lit(cfg.lr), S::lit(cfg.eps));
        for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[b], &mut self.second[b]);
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + one_b1 * gi;
                v[i] = b2 * v[i] + one_b2 * gi * gi;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
