//! Layer primitives with explicit forward/backward passes.
//!
//! Feature maps are `(channels, voxels)` matrices with voxels in x-major,
//! z-fastest order; convolutions lower to a single GEMM through im2col.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::params::{Gradients, ParamId, ParamStore};
use crate::rng::Rng;

pub type Dims = [usize; 3];

/// A multi-channel 3D activation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub data: Array2<f32>,
    pub dims: Dims,
}

impl FeatureMap {
    pub fn new(data: Array2<f32>, dims: Dims) -> Self {
        debug_assert_eq!(data.ncols(), dims.iter().product::<usize>());
        FeatureMap { data, dims }
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn voxels(&self) -> usize {
        self.data.ncols()
    }
}

pub fn relu(x: &Array2<f32>) -> Array2<f32> {
    x.mapv(|v| v.max(0.0))
}

/// Mask `grad` by `pre > 0` in place.
pub fn relu_backward(grad: &mut Array2<f32>, pre: ArrayView2<'_, f32>) {
    grad.zip_mut_with(&pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
}

pub fn leaky_relu(x: &Array2<f32>, slope: f32) -> Array2<f32> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward(grad: &mut Array2<f32>, pre: &Array2<f32>, slope: f32) {
    grad.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g *= slope
        }
    });
}

fn conv_out(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

/// Valid output index range along one axis for kernel offset `d`.
fn valid_range(n_in: usize, n_out: usize, d: usize, s: usize, p: usize) -> (usize, usize) {
    // need 0 <= l*s + d - p <= n_in - 1
    let lo = if p > d { (p - d).div_ceil(s) } else { 0 };
    let hi = if n_in + p > d {
        ((n_in - 1 + p - d) / s + 1).min(n_out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// 3D convolution with cubic kernel, stride and zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv3d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = in_c * k * k * k;
        let bound = (6.0 / fan_in as f32).sqrt();
        let weight = store.add_uniform(format!("{name}.weight"), vec![out_c, in_c, k, k, k], bound, rng);
        let bias = store.add_zeros(format!("{name}.bias"), vec![out_c]);
        Conv3d {
            in_c,
            out_c,
            k,
            stride,
            pad,
            weight,
            bias,
        }
    }

    pub fn out_dims(&self, d: Dims) -> Option<Dims> {
        let mut o = [0; 3];
        for a in 0..3 {
            if d[a] + 2 * self.pad < self.k {
                return None;
            }
            o[a] = conv_out(d[a], self.k, self.stride, self.pad);
        }
        Some(o)
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    fn im2col(&self, x: &FeatureMap, od: Dims) -> Array2<f32> {
        let (k, s, p) = (self.k, self.stride, self.pad);
        let [_, ny, nz] = x.dims;
        let [ox, oy, oz] = od;
        let mut cols = Array2::<f32>::zeros((self.in_c * k * k * k, ox * oy * oz));
        for c in 0..self.in_c {
            let src = x.data.row(c);
            let src = src.as_slice().expect("contiguous feature row");
            for dx in 0..k {
                let (ix0, ix1) = valid_range(x.dims[0], ox, dx, s, p);
                for dy in 0..k {
                    let (jy0, jy1) = valid_range(ny, oy, dy, s, p);
                    for dz in 0..k {
                        let (lz0, lz1) = valid_range(nz, oz, dz, s, p);
                        let row = ((c * k + dx) * k + dy) * k + dz;
                        let mut dst = cols.row_mut(row);
                        let dst = dst.as_slice_mut().expect("contiguous col row");
                        for i in ix0..ix1 {
                            let xi = i * s + dx - p;
                            for j in jy0..jy1 {
                                let yj = j * s + dy - p;
                                let sbase = (xi * ny + yj) * nz;
                                let dbase = (i * oy + j) * oz;
                                if s == 1 {
                                    let z0 = lz0 + dz - p;
                                    dst[dbase + lz0..dbase + lz1]
                                        .copy_from_slice(&src[sbase + z0..sbase + z0 + (lz1 - lz0)]);
                                } else {
                                    for l in lz0..lz1 {
                                        dst[dbase + l] = src[sbase + l * s + dz - p];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &Array2<f32>, in_dims: Dims, od: Dims) -> Array2<f32> {
        let (k, s, p) = (self.k, self.stride, self.pad);
        let [nx, ny, nz] = in_dims;
        let [ox, oy, oz] = od;
        let mut out = Array2::<f32>::zeros((self.in_c, nx * ny * nz));
        for c in 0..self.in_c {
            let mut dst = out.row_mut(c);
            let dst = dst.as_slice_mut().expect("contiguous");
            for dx in 0..k {
                let (ix0, ix1) = valid_range(nx, ox, dx, s, p);
                for dy in 0..k {
                    let (jy0, jy1) = valid_range(ny, oy, dy, s, p);
                    for dz in 0..k {
                        let (lz0, lz1) = valid_range(nz, oz, dz, s, p);
                        let row = ((c * k + dx) * k + dy) * k + dz;
                        let src = cols.row(row);
                        let src = src.as_slice().expect("contiguous");
                        for i in ix0..ix1 {
                            let xi = i * s + dx - p;
                            for j in jy0..jy1 {
                                let yj = j * s + dy - p;
                                let dbase = (xi * ny + yj) * nz;
                                let sbase = (i * oy + j) * oz;
                                for l in lz0..lz1 {
                                    dst[dbase + l * s + dz - p] += src[sbase + l];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn weight_matrix<'a>(&self, store: &'a ParamStore) -> ArrayView2<'a, f32> {
        ArrayView2::from_shape((self.out_c, self.in_c * self.k.pow(3)), store.get(self.weight))
            .expect("weight shape")
    }

    /// Returns the output and the lowered input needed by `backward`.
    pub fn forward(&self, store: &ParamStore, x: &FeatureMap) -> (FeatureMap, Array2<f32>) {
        let od = self.out_dims(x.dims).expect("validated dims");
        let cols = if self.is_pointwise() {
            x.data.clone()
        } else {
            self.im2col(x, od)
        };
        let w = self.weight_matrix(store);
        let mut out = Array2::<f32>::zeros((self.out_c, cols.ncols()));
        general_mat_mul(1.0, &w, &cols, 0.0, &mut out);
        let b = store.get(self.bias);
        for (mut row, &bv) in out.axis_iter_mut(Axis(0)).zip(b) {
            row += bv;
        }
        (FeatureMap::new(out, od), cols)
    }

    /// Accumulates weight/bias gradients into `grads`; returns the input
    /// gradient when `need_input` is set.
    pub fn backward(
        &self,
        store: &ParamStore,
        grad_out: &Array2<f32>,
        cols: &Array2<f32>,
        in_dims: Dims,
        grads: &mut Gradients,
        need_input: bool,
    ) -> Option<Array2<f32>> {
        let gw_len = self.out_c * self.in_c * self.k.pow(3);
        {
            let gw = grads.get_mut(self.weight);
            let mut gw = ndarray::ArrayViewMut2::from_shape((self.out_c, gw_len / self.out_c), gw)
                .expect("grad shape");
            general_mat_mul(1.0, grad_out, &cols.t(), 1.0, &mut gw);
        }
        {
            let gb = grads.get_mut(self.bias);
            for (g, row) in gb.iter_mut().zip(grad_out.axis_iter(Axis(0))) {
                *g += row.sum();
            }
        }
        if !need_input {
            return None;
        }
        let w = self.weight_matrix(store);
        let mut gcols = Array2::<f32>::zeros((w.ncols(), grad_out.ncols()));
        general_mat_mul(1.0, &w.t(), grad_out, 0.0, &mut gcols);
        if self.is_pointwise() {
            Some(gcols)
        } else {
            let od = self.out_dims(in_dims).expect("validated dims");
            Some(self.col2im(&gcols, in_dims, od))
        }
    }
}

/// Per-axis pooling window: 2 where the axis allows it, else 1.
pub fn pool_window(d: Dims) -> Dims {
    d.map(|n| if n >= 2 { 2 } else { 1 })
}

pub fn pool_dims(d: Dims) -> Dims {
    let w = pool_window(d);
    [d[0] / w[0], d[1] / w[1], d[2] / w[2]]
}

fn pool_windows(d: Dims) -> (Dims, Dims) {
    (pool_window(d), pool_dims(d))
}

/// Max pooling; returns the output and the flat argmax index per output.
pub fn max_pool(x: &FeatureMap) -> (FeatureMap, Vec<u32>) {
    let (w, od) = pool_windows(x.dims);
    let [_, ny, nz] = x.dims;
    let n_out = od.iter().product::<usize>();
    let mut out = Array2::<f32>::zeros((x.channels(), n_out));
    let mut arg = vec![0u32; x.channels() * n_out];
    for c in 0..x.channels() {
        let src = x.data.row(c);
        for i in 0..od[0] {
            for j in 0..od[1] {
                for l in 0..od[2] {
                    let o = (i * od[1] + j) * od[2] + l;
                    let mut best = f32::NEG_INFINITY;
                    let mut best_idx = 0;
                    for a in 0..w[0] {
                        for b in 0..w[1] {
                            for e in 0..w[2] {
                                let idx = ((i * w[0] + a) * ny + j * w[1] + b) * nz + l * w[2] + e;
                                if src[idx] > best {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    out[[c, o]] = best;
                    arg[c * n_out + o] = best_idx as u32;
                }
            }
        }
    }
    (FeatureMap::new(out, od), arg)
}

pub fn max_pool_backward(grad: &Array2<f32>, arg: &[u32], in_dims: Dims) -> Array2<f32> {
    let n_in = in_dims.iter().product::<usize>();
    let n_out = grad.ncols();
    let mut out = Array2::<f32>::zeros((grad.nrows(), n_in));
    for c in 0..grad.nrows() {
        for o in 0..n_out {
            out[[c, arg[c * n_out + o] as usize]] += grad[[c, o]];
        }
    }
    out
}

pub fn avg_pool(x: &FeatureMap) -> FeatureMap {
    let (w, od) = pool_windows(x.dims);
    let [_, ny, nz] = x.dims;
    let scale = 1.0 / (w[0] * w[1] * w[2]) as f32;
    let n_out = od.iter().product::<usize>();
    let mut out = Array2::<f32>::zeros((x.channels(), n_out));
    for c in 0..x.channels() {
        let src = x.data.row(c);
        for i in 0..od[0] {
            for j in 0..od[1] {
                for l in 0..od[2] {
                    let mut acc = 0.0;
                    for a in 0..w[0] {
                        for b in 0..w[1] {
                            for e in 0..w[2] {
                                acc += src[((i * w[0] + a) * ny + j * w[1] + b) * nz + l * w[2] + e];
                            }
                        }
                    }
                    out[[c, (i * od[1] + j) * od[2] + l]] = acc * scale;
                }
            }
        }
    }
    FeatureMap::new(out, od)
}

pub fn avg_pool_backward(grad: &Array2<f32>, in_dims: Dims) -> Array2<f32> {
    let (w, od) = pool_windows(in_dims);
    let [_, ny, nz] = in_dims;
    let scale = 1.0 / (w[0] * w[1] * w[2]) as f32;
    let mut out = Array2::<f32>::zeros((grad.nrows(), in_dims.iter().product()));
    for c in 0..grad.nrows() {
        for i in 0..od[0] {
            for j in 0..od[1] {
                for l in 0..od[2] {
                    let g = grad[[c, (i * od[1] + j) * od[2] + l]] * scale;
                    for a in 0..w[0] {
                        for b in 0..w[1] {
                            for e in 0..w[2] {
                                out[[c, ((i * w[0] + a) * ny + j * w[1] + b) * nz + l * w[2] + e]] += g;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Global average pooling over voxels.
pub fn global_avg_pool(x: &Array2<f32>) -> Array1<f32> {
    let n = x.ncols() as f64;
    x.axis_iter(Axis(0))
        .map(|r| (r.iter().map(|&v| v as f64).sum::<f64>() / n) as f32)
        .collect()
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_f: usize,
    pub out_f: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_f: usize, out_f: usize, gain: f32, rng: &mut Rng) -> Self {
        let bound = gain / (in_f as f32).sqrt();
        let weight = store.add_uniform(format!("{name}.weight"), vec![out_f, in_f], bound, rng);
        let bias = store.add_zeros(format!("{name}.bias"), vec![out_f]);
        Linear {
            in_f,
            out_f,
            weight,
            bias,
        }
    }

    fn w<'a>(&self, store: &'a ParamStore) -> ArrayView2<'a, f32> {
        ArrayView2::from_shape((self.out_f, self.in_f), store.get(self.weight)).expect("weight shape")
    }

    /// `x` is `(batch, in_f)`.
    pub fn forward(&self, store: &ParamStore, x: &Array2<f32>) -> Array2<f32> {
        let mut y = Array2::<f32>::zeros((x.nrows(), self.out_f));
        general_mat_mul(1.0, x, &self.w(store).t(), 0.0, &mut y);
        let b = ndarray::ArrayView1::from(store.get(self.bias));
        y += &b;
        y
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        x: &Array2<f32>,
        grad_out: &Array2<f32>,
        grads: &mut Gradients,
    ) -> Array2<f32> {
        {
            let gw = grads.get_mut(self.weight);
            let mut gw = ndarray::ArrayViewMut2::from_shape((self.out_f, self.in_f), gw).expect("shape");
            general_mat_mul(1.0, &grad_out.t(), x, 1.0, &mut gw);
        }
        {
            let gb = grads.get_mut(self.bias);
            for (g, col) in gb.iter_mut().zip(grad_out.axis_iter(Axis(1))) {
                *g += col.sum();
            }
        }
        grad_out.dot(&self.w(store))
    }
}

/// Stack `(channels, voxels)` maps along the channel axis.
pub fn concat_channels(parts: &[&Array2<f32>]) -> Array2<f32> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("matching voxel counts")
}

pub fn channel_slice(x: &Array2<f32>, from: usize, to: usize) -> ArrayView2<'_, f32> {
    x.slice(s![from..to, ..])
}
