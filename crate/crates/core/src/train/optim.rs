use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adamw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adamw,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "optimizer needs beta1, beta2 in [0, 1), eps > 0, weight_decay >= 0".into(),
            ))
        }
    }
}

/// AdamW (decoupled weight decay) over a fixed list of parameter tensors.
/// With [`OptimizerKind::Sgd`] the moments are unused and the update is
/// `θ ← θ − lr·(g + λθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    cfg: OptimizerConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl AdamW {
    pub fn new(cfg: OptimizerConfig, tensor_lens: &[usize]) -> Self {
        Self {
            cfg,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every tensor; `params[i]` pairs with `grads[i]`.
    pub fn step(&mut self, lr: f64, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.first.len(), "tensor count changed");
        self.steps += 1;
        let c = self.cfg;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= lr * (gi + c.weight_decay * *pi);
                    }
                }
            }
            OptimizerKind::Adamw => {
                let t = self.steps as i32;
                let bias1 = 1.0 - libm::pow(c.beta1, t as f64);
                let bias2 = 1.0 - libm::pow(c.beta2, t as f64);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((pi, &gi), mi), vi) in p
                        .iter_mut()
                        .zip(g.iter())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                        *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                        let m_hat = *mi / bias1;
                        let v_hat = *vi / bias2;
                        *pi -= lr * (m_hat / (libm::sqrt(v_hat) + c.eps) + c.weight_decay * *pi);
                    }
                }
            }
        }
    }
}
