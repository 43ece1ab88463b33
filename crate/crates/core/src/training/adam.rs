use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::project_nonneg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    /// One update of the entries selected by `trainable`, followed by
    /// clamping the entries selected by `nonneg` at zero. On a non-finite
    /// gradient or update nothing is modified.
    pub fn step(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
        trainable: &[bool],
        nonneg: &[bool],
    ) -> Result<()> {
        let n = params.len();
        assert!(grads.len() == n && self.m.len() == n && trainable.len() == n && nonneg.len() == n);
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient {} for parameter {i}", grads[i])));
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = (self.step + 1) as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let mut next = params.to_vec();
        let mut m = self.m.clone();
        let mut v = self.v.clone();
        for i in 0..n {
            if !trainable[i] {
                continue;
            }
            let g = grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            next[i] -= lr * mh / (vh.sqrt() + eps);
        }
        if let Some(i) = next.iter().position(|p| !p.is_finite()) {
            return Err(Error::Divergence(format!("non-finite update for parameter {i}")));
        }
        project_nonneg(&mut next, nonneg);
        params.copy_from_slice(&next);
        self.m = m;
        self.v = v;
        self.step += 1;
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`] with every parameter trainable.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64, nonneg: &[bool]) -> Result<()> {
    let all = vec![true; params.len()];
    state.step(params, grads, lr, &all, nonneg)
}
