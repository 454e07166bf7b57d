//! Adam with bias correction over the tensors of [`ModelParams`].

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::salience::Gradients;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    /// First moments, one buffer per tensor in [`ModelParams::tensors`] order.
    pub m: Vec<Vec<f64>>,
    /// Second moments.
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        let zeros = || params.tensors().iter().map(|t| alloc::vec![0.0; t.len()]).collect();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update `θ ← θ - lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        let g = grads.tensors();
        {
            let p = params.tensors();
            for i in 0..p.len() {
                if p[i].len() != g[i].len() || p[i].len() != self.m[i].len() {
                    return Err(Error::DimensionMismatch {
                        expected: p[i].len(),
                        found: g[i].len(),
                    });
                }
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(beta1, t as f64);
        let bc2 = 1.0 - libm::pow(beta2, t as f64);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(g)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}

/// Adam on a single scalar sequence; used to check the recurrences by hand.
pub fn adam_scalar(mut param: f64, grads: &[f64], config: AdamConfig) -> f64 {
    let (mut m, mut v) = (0.0, 0.0);
    for (t, &g) in grads.iter().enumerate() {
        let t = (t + 1) as f64;
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        let m_hat = m / (1.0 - libm::pow(config.beta1, t));
        let v_hat = v / (1.0 - libm::pow(config.beta2, t));
        param -= config.lr * m_hat / (libm::sqrt(v_hat) + config.eps);
    }
    param
}
