//! Straightforward f64 forward passes of the encoder, head and
//! discriminator, read from the networks' named parameters. Used as the
//! finite-difference side of the gradient checks.

use std::collections::BTreeMap;

use ndarray::Array3;
use uda_core::nn::{EncoderConfig, ParamStore};

pub type Weights = BTreeMap<String, Vec<f64>>;

pub fn weights(store: &ParamStore, prefix: &str) -> Weights {
    store
        .iter()
        .map(|p| (format!("{prefix}{}", p.name), p.data.iter().map(|&v| v as f64).collect()))
        .collect()
}

type Map = Vec<Array3<f64>>;

fn relu(x: &Map) -> Map {
    x.iter().map(|c| c.mapv(|v| v.max(0.0))).collect()
}

fn conv(x: &Map, w: &Weights, name: &str, k: usize, stride: usize, pad: usize) -> Map {
    let weight = &w[&format!("{name}.weight")];
    let bias = &w[&format!("{name}.bias")];
    let in_c = x.len();
    let (nx, ny, nz) = x[0].dim();
    let out = |n: usize| (n + 2 * pad - k) / stride + 1;
    let (ox, oy, oz) = (out(nx), out(ny), out(nz));
    (0..bias.len())
        .map(|o| {
            Array3::from_shape_fn((ox, oy, oz), |(i, j, l)| {
                let mut acc = bias[o];
                for c in 0..in_c {
                    for a in 0..k {
                        for b in 0..k {
                            for e in 0..k {
                                let (xi, yj, zl) = (
                                    (i * stride + a) as isize - pad as isize,
                                    (j * stride + b) as isize - pad as isize,
                                    (l * stride + e) as isize - pad as isize,
                                );
                                if xi < 0 || yj < 0 || zl < 0 {
                                    continue;
                                }
                                let Some(v) = x[c].get((xi as usize, yj as usize, zl as usize)) else {
                                    continue;
                                };
                                acc += weight[(((o * in_c + c) * k + a) * k + b) * k + e] * v;
                            }
                        }
                    }
                }
                acc
            })
        })
        .collect()
}

fn pool(x: &Map, reduce: fn(&[f64]) -> f64) -> Map {
    x.iter()
        .map(|c| {
            let (nx, ny, nz) = c.dim();
            let w = [nx, ny, nz].map(|n| if n >= 2 { 2 } else { 1 });
            Array3::from_shape_fn((nx / w[0], ny / w[1], nz / w[2]), |(i, j, l)| {
                let mut vals = Vec::new();
                for a in 0..w[0] {
                    for b in 0..w[1] {
                        for e in 0..w[2] {
                            vals.push(c[(i * w[0] + a, j * w[1] + b, l * w[2] + e)]);
                        }
                    }
                }
                reduce(&vals)
            })
        })
        .collect()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Dense 3D encoder: stem conv, ReLU, optional max pool; dense blocks with
/// pre-activation layers; 1x1 transitions with average pooling; final ReLU
/// and global average pooling.
pub fn encoder(cfg: &EncoderConfig, w: &Weights, x: &Array3<f32>) -> Vec<f64> {
    let mut cur = vec![x.mapv(|v| v as f64)];
    cur = relu(&conv(&cur, w, "stem", cfg.stem_kernel, cfg.stem_stride, cfg.stem_kernel / 2));
    if cfg.stem_pool {
        cur = pool(&cur, max);
    }
    for (b, &n) in cfg.block_layers.iter().enumerate() {
        for l in 0..n {
            let name = format!("block{b}.layer{l}");
            let mut a = relu(&cur);
            if cfg.bottleneck_width.is_some() {
                a = relu(&conv(&a, w, &format!("{name}.bottleneck"), 1, 1, 0));
            }
            cur.extend(conv(&a, w, &format!("{name}.conv"), 3, 1, 1));
        }
        cur = relu(&cur);
        if b + 1 < cfg.block_layers.len() {
            cur = pool(&conv(&cur, w, &format!("transition{b}"), 1, 1, 0), mean);
        }
    }
    cur.iter().map(|c| c.mean().expect("non-empty")).collect()
}

/// Fully connected network ending in one logit; `slope` is the leaky-ReLU
/// slope of the hidden layers.
pub fn mlp(w: &Weights, prefix: &str, hidden: usize, slope: f64, x: &[f64]) -> f64 {
    let layer = |name: &str, x: &[f64]| -> Vec<f64> {
        let wt = &w[&format!("{prefix}.{name}.weight")];
        let b = &w[&format!("{prefix}.{name}.bias")];
        (0..b.len())
            .map(|o| b[o] + (0..x.len()).map(|i| wt[o * x.len() + i] * x[i]).sum::<f64>())
            .collect()
    };
    let mut h = x.to_vec();
    for i in 0..hidden {
        h = layer(&format!("fc{i}"), &h)
            .into_iter()
            .map(|v| if v > 0.0 { v } else { slope * v })
            .collect();
    }
    layer("out", &h)[0]
}

/// Binary cross-entropy with logits, written as `softplus(z) - y z`.
pub fn bce(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if y { z } else { 0.0 }
}

/// Focal loss `-(1 - p_t)^γ ln p_t`.
pub fn focal(z: f64, y: bool, gamma: f64) -> f64 {
    let zt = if y { z } else { -z };
    let p_t = 1.0 / (1.0 + (-zt).exp());
    (1.0 - p_t).powf(gamma) * bce(zt, true)
}
