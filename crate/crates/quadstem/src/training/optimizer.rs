//! Adam with global-norm gradient clipping and cosine learning-rate decay.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{QuadstemError, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, grad_clip: 5.0 }
    }
}

pub struct Adam {
    pub cfg: AdamConfig,
    pub step: usize,
    pub m: BTreeMap<String, Array2<f64>>,
    pub v: BTreeMap<String, Array2<f64>>,
}

/// Cosine decay from `base` at step 0 to 0 at `total` steps.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let t = (step as f64 / total as f64).min(1.0);
    base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

pub fn global_grad_norm(grads: &BTreeMap<String, Array2<f64>>) -> f64 {
    grads
        .values()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    /// One update over all named gradients. Clips by global norm, then applies
    /// bias-corrected Adam at the given learning rate. Returns the pre-clip
    /// gradient norm.
    pub fn apply(
        &mut self,
        params: &mut ModelParams,
        grads: &BTreeMap<String, Array2<f64>>,
        lr: f64,
    ) -> Result<f64> {
        for (name, g) in grads {
            if !g.iter().all(|x| x.is_finite()) {
                return Err(QuadstemError::NonFinite(format!("gradient '{name}'")));
            }
        }
        let norm = global_grad_norm(grads);
        let clip_scale = if self.cfg.grad_clip > 0.0 && norm > self.cfg.grad_clip {
            self.cfg.grad_clip / norm
        } else {
            1.0
        };

        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.cfg.beta1.powf(t);
        let bc2 = 1.0 - self.cfg.beta2.powf(t);
        for (name, g_raw) in grads {
            let p = params.arrays.get_mut(name).ok_or_else(|| {
                QuadstemError::InvalidInput(format!("gradient for unknown parameter '{name}'"))
            })?;
            if p.dim() != g_raw.dim() {
                return Err(QuadstemError::ShapeMismatch(format!(
                    "parameter '{name}': {:?} vs gradient {:?}",
                    p.dim(),
                    g_raw.dim()
                )));
            }
            let g = g_raw * clip_scale;
            let m = self.m.entry(name.clone()).or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v.entry(name.clone()).or_insert_with(|| Array2::zeros(g.dim()));
            *m = &*m * self.cfg.beta1 + &g * (1.0 - self.cfg.beta1);
            *v = &*v * self.cfg.beta2 + &(&g * &g) * (1.0 - self.cfg.beta2);
            let update = (&*m / bc1) / ((&*v / bc2).mapv(f64::sqrt) + self.cfg.eps);
            *p -= &(update * lr);
        }
        Ok(norm)
    }
}
