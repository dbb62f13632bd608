//! Volume preprocessing: resizing, ROI localization and cropping,
//! intensity normalization, training augmentations, and Dice scoring.

mod augment;
mod dsc;
mod resize;
mod roi;

pub use augment::{augment, sample_intensity_factor, AugmentConfig};
pub use dsc::dsc;
pub use resize::{resize_mask, resize_volume, Interpolation};
pub use roi::{crop_roi, locate_roi};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Shape3, VolumeSample};

/// Resize, ROI crop and normalization applied to every raw volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub resize_to: Shape3,
    pub crop: Shape3,
}

impl PreprocessConfig {
    /// Full-size geometry: 384x384x160 resize, 256x256x128 crop.
    pub fn full() -> Self {
        PreprocessConfig {
            resize_to: [384, 384, 160],
            crop: [256, 256, 128],
        }
    }

    /// Desk-scale geometry yielding 48x48x24 network inputs.
    pub fn desk() -> Self {
        PreprocessConfig {
            resize_to: [64, 64, 32],
            crop: [48, 48, 24],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resize_to.contains(&0) || self.crop.contains(&0) {
            return Err(Error::Config("resize and crop shapes must be positive".into()));
        }
        Ok(())
    }
}

/// Resize (trilinear volume, nearest mask), crop the ROI located from the
/// mask, then z-score the crop. The sample must carry a mask.
pub fn preprocess_sample(v: &VolumeSample, cfg: &PreprocessConfig) -> Result<VolumeSample> {
    cfg.validate()?;
    if v.mask.is_none() {
        return Err(Error::Localization(format!("sample `{}` has no mask", v.sample_id)));
    }
    let resized = resize_volume(v, cfg.resize_to, Interpolation::Trilinear)?;
    let center = locate_roi(resized.mask.as_ref().expect("mask kept by resize"), cfg.crop)?;
    let cropped = crop_roi(&resized, center, cfg.crop)?;
    Ok(normalize_zscore(&cropped))
}

/// Per-volume z-score normalization. A constant volume is only centred.
pub fn normalize_zscore(v: &VolumeSample) -> VolumeSample {
    let n = v.voxels.len() as f64;
    let mean = v.voxels.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.voxels.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = if sd > 1e-12 { 1.0 / sd } else { 1.0 };
    let mut out = v.clone();
    out.voxels
        .mapv_inplace(|x| ((x as f64 - mean) * scale) as f32);
    out
}
