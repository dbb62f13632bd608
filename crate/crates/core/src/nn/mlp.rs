//! Classification head and domain discriminator.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layers::{leaky_relu, leaky_relu_backward, Linear};
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub leaky_slope: f32,
}

/// Feed-forward network ending in a single logit. Sigmoids belong to the
/// losses, not the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    cfg: MlpConfig,
    params: ParamStore,
    layers: Vec<Linear>,
}

pub struct MlpTape {
    inputs: Vec<Array2<f32>>,
    pre: Vec<Array2<f32>>,
}

impl Mlp {
    pub fn new(cfg: MlpConfig, name: &str, seed: u64) -> Result<Self> {
        if cfg.input_dim == 0 || cfg.hidden.contains(&0) {
            return Err(Error::Config(format!("{name}: widths must be positive")));
        }
        let mut rng = rng_from(seed);
        let mut params = ParamStore::new();
        let mut layers = Vec::new();
        let mut width = cfg.input_dim;
        let gain = (6.0f32 / (1.0 + cfg.leaky_slope * cfg.leaky_slope)).sqrt();
        for (i, &h) in cfg.hidden.iter().enumerate() {
            layers.push(Linear::new(&mut params, &format!("{name}.fc{i}"), width, h, gain, &mut rng));
            width = h;
        }
        layers.push(Linear::new(&mut params, &format!("{name}.out"), width, 1, 1.0, &mut rng));
        Ok(Mlp { cfg, params, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check(&self, x: &Array2<f32>) -> Result<()> {
        if x.ncols() != self.cfg.input_dim {
            return Err(Error::arg(
                "features",
                format!("width {} does not match {}", x.ncols(), self.cfg.input_dim),
            ));
        }
        Ok(())
    }

    /// Logits for a `(batch, input_dim)` feature matrix.
    pub fn forward(&self, x: &Array2<f32>) -> Result<Array1<f32>> {
        self.forward_train(x).map(|(y, _)| y)
    }

    pub fn forward_train(&self, x: &Array2<f32>) -> Result<(Array1<f32>, MlpTape)> {
        self.check(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&self.params, &h);
            inputs.push(h);
            if i + 1 < self.layers.len() {
                h = leaky_relu(&z, self.cfg.leaky_slope);
                pre.push(z);
            } else {
                h = z;
            }
        }
        let logits = h.column(0).to_owned();
        Ok((logits, MlpTape { inputs, pre }))
    }

    /// Parameter gradients and the gradient w.r.t. the input features.
    pub fn backward(&self, tape: &MlpTape, grad_logits: &Array1<f32>) -> (Gradients, Array2<f32>) {
        let mut grads = self.params.zero_grads();
        let mut g = grad_logits.clone().insert_axis(ndarray::Axis(1));
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                leaky_relu_backward(&mut g, &tape.pre[i], self.cfg.leaky_slope);
            }
            g = self.layers[i].backward(&self.params, &tape.inputs[i], &g, &mut grads);
        }
        (grads, g)
    }
}

/// Classification head: one affine map `F -> 1`.
pub fn build_head(feature_dim: usize, seed: u64) -> Result<Mlp> {
    Mlp::new(
        MlpConfig {
            input_dim: feature_dim,
            hidden: vec![],
            leaky_slope: 0.0,
        },
        "head",
        seed,
    )
}

/// Domain discriminator: leaky-ReLU MLP with the given hidden widths.
pub fn build_discriminator(feature_dim: usize, hidden: &[usize], seed: u64) -> Result<Mlp> {
    Mlp::new(
        MlpConfig {
            input_dim: feature_dim,
            hidden: hidden.to_vec(),
            leaky_slope: 0.2,
        },
        "discriminator",
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng as _;

    #[test]
    fn zero_head_gives_zero_logit() {
        let mut head = build_head(16, 0).unwrap();
        head.params_mut().iter_mut().for_each(|p| p.data.fill(0.0));
        let y = head.forward(&Array2::zeros((3, 16))).unwrap();
        assert_eq!(y, Array1::<f32>::zeros(3));
    }

    #[test]
    fn discriminator_shape() {
        let d = build_discriminator(16, &[32, 32], 1).unwrap();
        let y = d.forward(&Array2::ones((4, 16))).unwrap();
        assert_eq!(y.len(), 4);
        assert!(d.forward(&Array2::ones((4, 15))).is_err());
    }

    fn fd_check(net: &mut Mlp, x: &Array2<f32>) {
        let w: Array1<f32> = (0..x.nrows()).map(|i| 1.0 - 0.4 * i as f32).collect();
        let (_, tape) = net.forward_train(x).unwrap();
        let (grads, gx) = net.backward(&tape, &w);
        let loss = |n: &Mlp, x: &Array2<f32>| -> f64 {
            n.forward(x).unwrap().iter().zip(&w).map(|(a, b)| *a as f64 * *b as f64).sum()
        };
        let eps = 1e-2f32;
        for pi in 0..net.params().len() {
            for j in 0..grads.0[pi].len().min(6) {
                let orig = net.params().iter().nth(pi).unwrap().data[j];
                net.params_mut().iter_mut().nth(pi).unwrap().data[j] = orig + eps;
                let up = loss(net, x);
                net.params_mut().iter_mut().nth(pi).unwrap().data[j] = orig - eps;
                let down = loss(net, x);
                net.params_mut().iter_mut().nth(pi).unwrap().data[j] = orig;
                let fd = (up - down) / (2.0 * eps as f64);
                let a = grads.0[pi][j] as f64;
                assert!((a - fd).abs() <= 1e-3 * a.abs().max(fd.abs()).max(1e-1), "{a} vs {fd}");
            }
        }
        for j in 0..x.ncols() {
            let mut xp = x.clone();
            xp[[0, j]] += eps;
            let mut xm = x.clone();
            xm[[0, j]] -= eps;
            let fd = (loss(net, &xp) - loss(net, &xm)) / (2.0 * eps as f64);
            let a = gx[[0, j]] as f64;
            assert!((a - fd).abs() <= 1e-3 * a.abs().max(fd.abs()).max(1e-1), "{a} vs {fd}");
        }
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let mut rng = rng_from(3);
        let x = Array2::from_shape_fn((3, 8), |_| rng.random_range(-1.0..1.0));
        fd_check(&mut build_head(8, 2).unwrap(), &x);
    }

    #[test]
    fn discriminator_gradients_match_finite_differences() {
        let mut rng = rng_from(4);
        let x = Array2::from_shape_fn((3, 6), |_| rng.random_range(-1.0..1.0));
        fd_check(&mut build_discriminator(6, &[7, 5], 5).unwrap(), &x);
    }
}
