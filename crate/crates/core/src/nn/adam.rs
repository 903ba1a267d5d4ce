use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Result of an Adam step. Non-finite gradients leave parameters and
/// moments untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdamOutcome {
    Applied,
    Rejected {
        tensor: usize,
        index: usize,
        value: f64,
    },
}

/// First/second moment accumulators shaped like the parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for parameter tensors of the given lengths.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        AdamState {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<AdamOutcome> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dim(
                "AdamState::step tensors",
                self.m.len(),
                params.len().min(grads.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::dim(
                    format!("AdamState::step tensor {i}"),
                    self.m[i].len(),
                    p.len(),
                ));
            }
        }
        for (t, g) in grads.iter().enumerate() {
            if let Some(idx) = g.iter().position(|v| !v.is_finite()) {
                log::warn!("adam: rejecting step, tensor {t} index {idx} = {}", g[idx]);
                return Ok(AdamOutcome::Rejected {
                    tensor: t,
                    index: idx,
                    value: g[idx],
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[t];
            let v = &mut self.v[t];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(AdamOutcome::Applied)
    }
}
