use ndarray::Array3;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::resize::{sample_label, sample_zero_fill};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::volume::{SegmentationMask, VolumeSample};

/// Stochastic training augmentations. Each transform fires independently
/// with `probability`, in the order noise, intensity scale, in-plane
/// rotation, size scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub noise_sd: f64,
    pub intensity_scale_range: [f64; 2],
    pub rotation_deg_range: [f64; 2],
    pub size_scale_range: [f64; 2],
    pub probability: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise_sd: 0.1,
            intensity_scale_range: [0.8, 1.2],
            rotation_deg_range: [-10.0, 10.0],
            size_scale_range: [1.0, 1.1],
            probability: 0.5,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Every transform disabled.
    pub fn off() -> Self {
        AugmentConfig {
            probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] <= r[1] && r.iter().all(|v| v.is_finite());
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("augment.noise_sd must be >= 0".into()));
        }
        if !ordered(self.intensity_scale_range)
            || !ordered(self.rotation_deg_range)
            || !ordered(self.size_scale_range)
        {
            return Err(Error::Config("augment ranges must be ordered and finite".into()));
        }
        if self.size_scale_range[0] <= 0.0 || self.intensity_scale_range[0] < 0.0 {
            return Err(Error::Config("augment scale ranges must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Config("augment.probability must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// Draw one intensity factor from `cfg.intensity_scale_range`.
pub fn sample_intensity_factor(cfg: &AugmentConfig, rng: &mut Rng) -> f64 {
    uniform(rng, cfg.intensity_scale_range)
}

/// Resample through an inverse coordinate map (output voxel -> input point).
fn warp(v: &mut VolumeSample, inverse: impl Fn([f64; 3]) -> [f64; 3]) {
    let src = v.voxels.clone();
    v.voxels = Array3::from_shape_fn(src.dim(), |(i, j, k)| {
        sample_zero_fill(&src, inverse([i as f64, j as f64, k as f64]))
    });
    if let Some(m) = &v.mask {
        let labels = m.labels();
        let warped = Array3::from_shape_fn(labels.dim(), |(i, j, k)| {
            sample_label(labels, inverse([i as f64, j as f64, k as f64]))
        });
        v.mask = Some(SegmentationMask::from_labels_unchecked(warped));
    }
}

/// Apply the augmentation chain. All randomness comes from `rng`; with
/// `probability == 0` the output equals the input bit for bit.
pub fn augment(v: &VolumeSample, cfg: &AugmentConfig, rng: &mut Rng) -> VolumeSample {
    let mut out = v.clone();
    let [nx, ny, nz] = v.shape();
    let centre = [(nx as f64 - 1.0) / 2.0, (ny as f64 - 1.0) / 2.0, (nz as f64 - 1.0) / 2.0];

    // each stage draws its coin and parameter unconditionally so the stream
    // position after augment() does not depend on which stages fired
    let fire = rng.random::<f64>() < cfg.probability;
    let noise_seed: u64 = rng.random();
    if fire && cfg.noise_sd > 0.0 {
        let mut nrng = crate::rng::rng_from(noise_seed);
        let normal = Normal::new(0.0, cfg.noise_sd).expect("validated noise sd");
        out.voxels
            .mapv_inplace(|x| x + normal.sample(&mut nrng) as f32);
    }

    let fire = rng.random::<f64>() < cfg.probability;
    let factor = sample_intensity_factor(cfg, rng);
    if fire {
        out.voxels.mapv_inplace(|x| (x as f64 * factor) as f32);
    }

    let fire = rng.random::<f64>() < cfg.probability;
    let degrees = uniform(rng, cfg.rotation_deg_range);
    if fire {
        let (s, c) = degrees.to_radians().sin_cos();
        warp(&mut out, |p| {
            let (dx, dy) = (p[0] - centre[0], p[1] - centre[1]);
            [centre[0] + c * dx + s * dy, centre[1] - s * dx + c * dy, p[2]]
        });
    }

    let fire = rng.random::<f64>() < cfg.probability;
    let zoom = uniform(rng, cfg.size_scale_range);
    if fire {
        warp(&mut out, |p| {
            [0, 1, 2].map(|a| centre[a] + (p[a] - centre[a]) / zoom)
        });
    }
    out
}
