//! Densely connected 3D convolutional encoder.
//!
//! Layout: stem convolution (+ ReLU, optional 2x max pool), then dense
//! blocks separated by transitions. Inside a block every layer reads the
//! channel-concatenation of the block input and all earlier layer outputs
//! and appends `growth_rate` new channels. A transition compresses channels
//! with a 1x1x1 convolution and halves each spatial axis with average
//! pooling. The encoder ends in ReLU and global average pooling.
//!
//! The network carries no normalization layers: with two volumes per batch,
//! batch statistics are too noisy to be useful.

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::layers::{
    avg_pool, avg_pool_backward, concat_channels, global_avg_pool, max_pool, max_pool_backward,
    relu, relu_backward, Conv3d, Dims, FeatureMap,
};
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_shape: Dims,
    /// Number of dense layers in each block.
    pub block_layers: Vec<usize>,
    pub growth_rate: usize,
    pub initial_channels: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub stem_pool: bool,
    /// Width of the 1x1x1 bottleneck before each 3x3x3 dense convolution;
    /// `None` skips the bottleneck.
    pub bottleneck_width: Option<usize>,
    /// Fraction of channels kept by each transition.
    pub compression: f64,
}

impl EncoderConfig {
    /// Desk-scale default: blocks (2,2,2), growth 8, 8 initial channels on
    /// 48x48x24 inputs.
    pub fn desk() -> Self {
        EncoderConfig {
            input_shape: [48, 48, 24],
            block_layers: vec![2, 2, 2],
            growth_rate: 8,
            initial_channels: 8,
            stem_kernel: 3,
            stem_stride: 2,
            stem_pool: true,
            bottleneck_width: None,
            compression: 0.5,
        }
    }

    /// DenseNet-121 layout: blocks (6,12,24,16), growth 32, 64 stem
    /// channels, 7^3 stride-2 stem with pooling, 4x growth bottlenecks.
    pub fn densenet121(input_shape: Dims) -> Self {
        EncoderConfig {
            input_shape,
            block_layers: vec![6, 12, 24, 16],
            growth_rate: 32,
            initial_channels: 64,
            stem_kernel: 7,
            stem_stride: 2,
            stem_pool: true,
            bottleneck_width: Some(128),
            compression: 0.5,
        }
    }

    /// Channel count entering each block and the final feature dimension.
    fn channel_plan(&self) -> (Vec<usize>, Vec<usize>, usize) {
        let mut c = self.initial_channels;
        let mut block_in = Vec::new();
        let mut trans_out = Vec::new();
        for (b, &n) in self.block_layers.iter().enumerate() {
            block_in.push(c);
            c += n * self.growth_rate;
            if b + 1 < self.block_layers.len() {
                let next = ((c as f64 * self.compression).floor() as usize).max(1);
                trans_out.push(next);
                c = next;
            }
        }
        (block_in, trans_out, c)
    }

    pub fn feature_dim(&self) -> usize {
        self.channel_plan().2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("encoder: {m}")));
        if self.input_shape.contains(&0) {
            return bad("input shape must be positive");
        }
        if self.block_layers.is_empty() || self.block_layers.contains(&0) {
            return bad("block layout must be non-empty with positive sizes");
        }
        if self.growth_rate == 0 || self.initial_channels == 0 || self.stem_kernel == 0 || self.stem_stride == 0 {
            return bad("growth rate, channels, stem kernel and stride must be positive");
        }
        if self.bottleneck_width == Some(0) {
            return bad("bottleneck width must be positive");
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return bad("compression must lie in (0, 1]");
        }
        let stem_pad = self.stem_kernel / 2;
        if self.input_shape.iter().any(|&n| n + 2 * stem_pad < self.stem_kernel) {
            return bad("input smaller than stem kernel");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    bottleneck: Option<Conv3d>,
    conv: Conv3d,
    in_c: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    layers: Vec<DenseLayer>,
}

/// Encoder network: `volume -> feature vector` of length `feature_dim()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    cfg: EncoderConfig,
    params: ParamStore,
    stem: Conv3d,
    blocks: Vec<Block>,
    transitions: Vec<Conv3d>,
}

struct LayerTape {
    bottleneck_in: Option<Array2<f32>>,
    bottleneck_pre: Option<Array2<f32>>,
    cols: Array2<f32>,
}

struct BlockTape {
    dims: Dims,
    /// Concatenation of block input and every layer output (pre-activation).
    concat: Array2<f32>,
    layers: Vec<LayerTape>,
}

struct TransitionTape {
    input: Array2<f32>,
    pooled_from: Dims,
}

/// Intermediate values from one forward pass, consumed by `backward`.
pub struct EncoderTape {
    stem_cols: Array2<f32>,
    stem_pre: FeatureMap,
    pool_arg: Option<Vec<u32>>,
    blocks: Vec<BlockTape>,
    transitions: Vec<TransitionTape>,
}

impl Encoder {
    pub fn new(cfg: EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from(seed);
        let mut params = ParamStore::new();
        let stem = Conv3d::new(
            &mut params,
            "stem",
            1,
            cfg.initial_channels,
            cfg.stem_kernel,
            cfg.stem_stride,
            cfg.stem_kernel / 2,
            &mut rng,
        );
        let (block_in, trans_out, _) = cfg.channel_plan();
        let mut blocks = Vec::new();
        let mut transitions = Vec::new();
        for (b, &n) in cfg.block_layers.iter().enumerate() {
            let mut layers = Vec::new();
            for l in 0..n {
                let in_c = block_in[b] + l * cfg.growth_rate;
                let name = format!("block{b}.layer{l}");
                let (bottleneck, conv_in) = match cfg.bottleneck_width {
                    Some(w) => (
                        Some(Conv3d::new(&mut params, &format!("{name}.bottleneck"), in_c, w, 1, 1, 0, &mut rng)),
                        w,
                    ),
                    None => (None, in_c),
                };
                let conv = Conv3d::new(&mut params, &format!("{name}.conv"), conv_in, cfg.growth_rate, 3, 1, 1, &mut rng);
                layers.push(DenseLayer { bottleneck, conv, in_c });
            }
            blocks.push(Block { layers });
            if b + 1 < cfg.block_layers.len() {
                let in_c = block_in[b] + n * cfg.growth_rate;
                transitions.push(Conv3d::new(
                    &mut params,
                    &format!("transition{b}"),
                    in_c,
                    trans_out[b],
                    1,
                    1,
                    0,
                    &mut rng,
                ));
            }
        }
        let enc = Encoder {
            cfg,
            params,
            stem,
            blocks,
            transitions,
        };
        enc.spatial_plan()?;
        Ok(enc)
    }

    /// Spatial dims after the stem and entering each block.
    fn spatial_plan(&self) -> Result<Vec<Dims>> {
        let mut d = self
            .stem
            .out_dims(self.cfg.input_shape)
            .ok_or_else(|| Error::Config("encoder: input smaller than stem".into()))?;
        if self.cfg.stem_pool {
            d = super::layers::pool_dims(d);
        }
        let mut dims = vec![d];
        for _ in &self.transitions {
            d = super::layers::pool_dims(d);
            dims.push(d);
        }
        if dims.iter().flatten().any(|&n| n == 0) {
            return Err(Error::Config("encoder: input too small for this layout".into()));
        }
        Ok(dims)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn feature_dim(&self) -> usize {
        self.cfg.feature_dim()
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check_input(&self, x: &Array3<f32>) -> Result<()> {
        let d = x.dim();
        if [d.0, d.1, d.2] != self.cfg.input_shape {
            return Err(Error::arg(
                "volume",
                format!("shape {:?} does not match encoder input {:?}", d, self.cfg.input_shape),
            ));
        }
        Ok(())
    }

    /// Forward pass keeping everything `backward` needs.
    pub fn forward_train(&self, x: &Array3<f32>) -> Result<(Array1<f32>, EncoderTape)> {
        self.check_input(x)?;
        let p = &self.params;
        let input = FeatureMap::new(
            x.as_standard_layout()
                .to_owned()
                .into_shape_with_order((1, x.len()))
                .expect("flatten"),
            self.cfg.input_shape,
        );
        let (stem_pre, stem_cols) = self.stem.forward(p, &input);
        let act = FeatureMap::new(relu(&stem_pre.data), stem_pre.dims);
        let (mut cur, pool_arg) = if self.cfg.stem_pool {
            let (m, arg) = max_pool(&act);
            (m, Some(arg))
        } else {
            (act, None)
        };

        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for (b, block) in self.blocks.iter().enumerate() {
            let dims = cur.dims;
            let mut concat = cur.data;
            let mut tapes = Vec::with_capacity(block.layers.len());
            for layer in &block.layers {
                let a = relu(&concat);
                let (conv_in, bottleneck_in, bottleneck_pre) = match &layer.bottleneck {
                    Some(bn) => {
                        let (pre, _) = bn.forward(p, &FeatureMap::new(a.clone(), dims));
                        (relu(&pre.data), Some(a), Some(pre.data))
                    }
                    None => (a, None, None),
                };
                let (out, cols) = layer.conv.forward(p, &FeatureMap::new(conv_in, dims));
                concat = concat_channels(&[&concat, &out.data]);
                tapes.push(LayerTape {
                    bottleneck_in,
                    bottleneck_pre,
                    cols,
                });
            }
            if let Some(tr) = self.transitions.get(b) {
                let a = relu(&concat);
                let (t, _) = tr.forward(p, &FeatureMap::new(a.clone(), dims));
                cur = avg_pool(&t);
                transitions.push(TransitionTape {
                    input: a,
                    pooled_from: t.dims,
                });
            } else {
                cur = FeatureMap::new(relu(&concat), dims);
            }
            blocks.push(BlockTape {
                dims,
                concat,
                layers: tapes,
            });
        }
        let features = global_avg_pool(&cur.data);
        Ok((
            features,
            EncoderTape {
                stem_cols,
                stem_pre,
                pool_arg,
                blocks,
                transitions,
            },
        ))
    }

    pub fn forward(&self, x: &Array3<f32>) -> Result<Array1<f32>> {
        self.forward_train(x).map(|(f, _)| f)
    }

    /// Gradients of `<features, grad_features>` with respect to every
    /// parameter.
    pub fn backward(&self, tape: &EncoderTape, grad_features: &Array1<f32>) -> Gradients {
        let p = &self.params;
        let mut grads = p.zero_grads();

        let last = tape.blocks.last().expect("at least one block");
        let n = last.concat.ncols() as f32;
        // GAP then final ReLU
        let mut g = Array2::<f32>::zeros(last.concat.raw_dim());
        for (mut row, &gf) in g.axis_iter_mut(Axis(0)).zip(grad_features) {
            row.fill(gf / n);
        }
        relu_backward(&mut g, last.concat.view());

        for b in (0..self.blocks.len()).rev() {
            let bt = &tape.blocks[b];
            if b + 1 < self.blocks.len() {
                // `g` holds the gradient w.r.t. the pooled transition output
                let tt = &tape.transitions[b];
                let gt = avg_pool_backward(&g, tt.pooled_from);
                let mut ga = self.transitions[b]
                    .backward(p, &gt, &tt.input, bt.dims, &mut grads, true)
                    .expect("input grad");
                relu_backward(&mut ga, bt.concat.view());
                g = ga;
            }
            // `g` is now the gradient w.r.t. the block's full concatenation
            for (l, layer) in self.blocks[b].layers.iter().enumerate().rev() {
                let lt = &bt.layers[l];
                let out_from = layer.in_c;
                let g_out = g.slice(ndarray::s![out_from..out_from + self.cfg.growth_rate, ..]).to_owned();
                let mut g_in = layer
                    .conv
                    .backward(p, &g_out, &lt.cols, bt.dims, &mut grads, true)
                    .expect("input grad");
                if let Some(bn) = &layer.bottleneck {
                    relu_backward(&mut g_in, lt.bottleneck_pre.as_ref().expect("tape").view());
                    g_in = bn
                        .backward(p, &g_in, lt.bottleneck_in.as_ref().expect("tape"), bt.dims, &mut grads, true)
                        .expect("input grad");
                }
                relu_backward(&mut g_in, bt.concat.slice(ndarray::s![..out_from, ..]));
                let mut head = g.slice_mut(ndarray::s![..out_from, ..]);
                head += &g_in;
            }
            g = g.slice(ndarray::s![..self.blocks[b].layers[0].in_c, ..]).to_owned();
        }

        // `g` is the gradient w.r.t. the (pooled) stem activation
        let stem_dims = tape.stem_pre.dims;
        let mut gs = match &tape.pool_arg {
            Some(arg) => max_pool_backward(&g, arg, stem_dims),
            None => g,
        };
        relu_backward(&mut gs, tape.stem_pre.data.view());
        self.stem
            .backward(p, &gs, &tape.stem_cols, self.cfg.input_shape, &mut grads, false);
        grads
    }

    /// Features for a batch, one row per volume, computed data-parallel.
    pub fn features(&self, xs: &[&Array3<f32>]) -> Result<Array2<f32>> {
        let rows = exec::try_map_range(xs.len(), |i| self.forward(xs[i]))?;
        let f = self.feature_dim();
        let mut out = Array2::<f32>::zeros((xs.len(), f));
        for (mut dst, row) in out.axis_iter_mut(Axis(0)).zip(rows) {
            dst.assign(&row);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            input_shape: [10, 8, 6],
            block_layers: vec![2, 1],
            growth_rate: 3,
            initial_channels: 4,
            stem_kernel: 3,
            stem_stride: 1,
            stem_pool: true,
            bottleneck_width: None,
            compression: 0.5,
        }
    }

    fn volume(shape: Dims, seed: u64) -> Array3<f32> {
        let mut rng = rng_from(seed);
        Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn feature_dims() {
        assert_eq!(EncoderConfig::densenet121([96, 96, 48]).feature_dim(), 1024);
        assert_eq!(EncoderConfig::desk().feature_dim(), 30);
        assert_eq!(tiny().feature_dim(), 8);
    }

    #[test]
    fn desk_batch_shape_and_determinism() {
        let enc = Encoder::new(EncoderConfig::desk(), 1).unwrap();
        let a = volume([48, 48, 24], 2);
        let b = volume([48, 48, 24], 3);
        let f = enc.features(&[&a, &b]).unwrap();
        assert_eq!(f.dim(), (2, 30));
        let again = enc.features(&[&a, &a]).unwrap();
        assert_eq!(again.row(0), again.row(1));
        assert_eq!(again.row(0), f.row(0));
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let enc = Encoder::new(tiny(), 0).unwrap();
        assert!(enc.forward(&volume([10, 8, 5], 0)).is_err());
        let mut cfg = tiny();
        cfg.block_layers = vec![2, 0];
        assert!(Encoder::new(cfg, 0).is_err());
    }

    /// Finite-difference check in the tiny layout, including a bottleneck.
    #[test]
    fn backward_matches_finite_differences() {
        for bottleneck in [None, Some(5)] {
            let mut cfg = tiny();
            cfg.bottleneck_width = bottleneck;
            let mut enc = Encoder::new(cfg, 7).unwrap();
            // push biases positive so few units sit at the ReLU kink
            for p in enc.params_mut().iter_mut() {
                if p.name.ends_with("bias") {
                    p.data.iter_mut().for_each(|v| *v = 0.05);
                }
            }
            let x = volume([10, 8, 6], 8);
            let w: Array1<f32> = (0..enc.feature_dim()).map(|i| 1.0 + 0.3 * i as f32).collect();
            let loss = |e: &Encoder| -> f64 {
                e.forward(&x)
                    .unwrap()
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| *a as f64 * *b as f64)
                    .sum()
            };
            let (_, tape) = enc.forward_train(&x).unwrap();
            let grads = enc.backward(&tape, &w);
            let mut rng = rng_from(99);
            let mut checked = 0;
            for _ in 0..40 {
                let pi = rng.random_range(0..enc.params().len());
                let len = grads.0[pi].len();
                let j = rng.random_range(0..len);
                let analytic = grads.0[pi][j] as f64;
                let eps = 1e-3f32;
                let orig = enc.params().iter().nth(pi).unwrap().data[j];
                enc.params_mut().iter_mut().nth(pi).unwrap().data[j] = orig + eps;
                let up = loss(&enc);
                enc.params_mut().iter_mut().nth(pi).unwrap().data[j] = orig - eps;
                let down = loss(&enc);
                enc.params_mut().iter_mut().nth(pi).unwrap().data[j] = orig;
                let fd = (up - down) / (2.0 * eps as f64);
                let scale = analytic.abs().max(fd.abs()).max(1e-2);
                assert!(
                    (analytic - fd).abs() / scale < 2e-2,
                    "param {pi}[{j}] analytic {analytic} fd {fd}"
                );
                checked += 1;
            }
            assert_eq!(checked, 40);
        }
    }
}
