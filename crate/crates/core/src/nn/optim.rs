//! Optimizers over a [`ParamStore`].
//!
//! Weight-decay conventions differ between the two and are chosen so that a
//! step with an all-zero loss gradient scales every weight by exactly
//! `1 - lr * weight_decay`:
//!
//! * [`Adam`] decays decoupled from the moment estimates
//!   (`w -= lr * wd * w`, then the Adam update);
//! * [`Sgd`] adds `wd * w` to the gradient before the momentum buffer, and
//!   the buffer starts at zero.

use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &ParamStore) -> Self {
        let zeros = params.zero_grads().0;
        Adam {
            cfg,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let decay = (1.0 - c.lr * c.weight_decay) as f32;
        for (((p, g), m), v) in params.iter_mut().zip(&grads.0).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.data.len() {
                let gi = g[i] as f64;
                let mi = c.beta1 * m[i] as f64 + (1.0 - c.beta1) * gi;
                let vi = c.beta2 * v[i] as f64 + (1.0 - c.beta2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let update = c.lr * (mi / bc1) / ((vi / bc2).sqrt() + c.eps);
                p.data[i] = p.data[i] * decay - update as f32;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 1e-3,
            momentum: 0.9,
            weight_decay: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub cfg: SgdConfig,
    buf: Vec<Vec<f32>>,
}

impl Sgd {
    pub fn new(cfg: SgdConfig, params: &ParamStore) -> Self {
        Sgd {
            cfg,
            buf: params.zero_grads().0,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        let c = &self.cfg;
        for ((p, g), b) in params.iter_mut().zip(&grads.0).zip(&mut self.buf) {
            for i in 0..p.data.len() {
                let d = g[i] as f64 + c.weight_decay * p.data[i] as f64;
                let bi = c.momentum * b[i] as f64 + d;
                b[i] = bi as f32;
                p.data[i] = (p.data[i] as f64 - c.lr * bi) as f32;
            }
        }
    }
}
