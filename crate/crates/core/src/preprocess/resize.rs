use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{SegmentationMask, Shape3, VolumeSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Source coordinate of output index `i` under half-voxel alignment.
#[inline]
fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    (i as f64 + 0.5) * (n_in as f64 / n_out as f64) - 0.5
}

/// Linear interpolation weights along one axis with edge clamping.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f32)> {
    (0..n_out)
        .map(|i| {
            let c = source_coord(i, n_in, n_out).clamp(0.0, (n_in - 1) as f64);
            let lo = c.floor() as usize;
            let hi = (lo + 1).min(n_in - 1);
            (lo, hi, (c - lo as f64) as f32)
        })
        .collect()
}

fn nearest_index(i: usize, n_in: usize, n_out: usize) -> usize {
    let c = (i as f64 + 0.5) * (n_in as f64 / n_out as f64);
    (c.floor() as usize).min(n_in - 1)
}

fn trilinear(src: &Array3<f32>, shape: Shape3) -> Array3<f32> {
    let (nx, ny, nz) = src.dim();
    let tx = axis_taps(nx, shape[0]);
    let ty = axis_taps(ny, shape[1]);
    let tz = axis_taps(nz, shape[2]);
    Array3::from_shape_fn(shape, |(i, j, k)| {
        let (x0, x1, fx) = tx[i];
        let (y0, y1, fy) = ty[j];
        let (z0, z1, fz) = tz[k];
        let lerp = |a: f32, b: f32, t: f32| if t == 0.0 { a } else { a + (b - a) * t };
        let plane = |x: usize| {
            let a = lerp(src[[x, y0, z0]], src[[x, y0, z1]], fz);
            let b = lerp(src[[x, y1, z0]], src[[x, y1, z1]], fz);
            lerp(a, b, fy)
        };
        lerp(plane(x0), plane(x1), fx)
    })
}

fn nearest<T: Copy>(src: &Array3<T>, shape: Shape3) -> Array3<T> {
    let (nx, ny, nz) = src.dim();
    Array3::from_shape_fn(shape, |(i, j, k)| {
        src[[
            nearest_index(i, nx, shape[0]),
            nearest_index(j, ny, shape[1]),
            nearest_index(k, nz, shape[2]),
        ]]
    })
}

fn check_shape(target: Shape3) -> Result<()> {
    if target.contains(&0) {
        return Err(Error::arg("target_shape", format!("{target:?} must be positive")));
    }
    Ok(())
}

/// Resample a mask with nearest-neighbour lookup.
pub fn resize_mask(mask: &SegmentationMask, target: Shape3) -> Result<SegmentationMask> {
    check_shape(target)?;
    Ok(SegmentationMask::from_labels_unchecked(nearest(mask.labels(), target)))
}

/// Resample `v` to `target`. Intensities use `mode`; an attached mask is
/// always resampled nearest-neighbour. Spacing scales by `in / out` per axis.
pub fn resize_volume(v: &VolumeSample, target: Shape3, mode: Interpolation) -> Result<VolumeSample> {
    check_shape(target)?;
    let shape = v.shape();
    let voxels = match mode {
        Interpolation::Trilinear => trilinear(&v.voxels, target),
        Interpolation::Nearest => nearest(&v.voxels, target),
    };
    let mask = v.mask.as_ref().map(|m| resize_mask(m, target)).transpose()?;
    let mut spacing = v.spacing;
    for a in 0..3 {
        spacing[a] *= shape[a] as f64 / target[a] as f64;
    }
    Ok(VolumeSample {
        sample_id: v.sample_id.clone(),
        voxels,
        spacing,
        domain: v.domain,
        mask,
        label: v.label,
    })
}

/// Trilinear sample at a continuous coordinate; zero outside the volume.
pub(crate) fn sample_zero_fill(src: &Array3<f32>, p: [f64; 3]) -> f32 {
    let (nx, ny, nz) = src.dim();
    let dims = [nx, ny, nz];
    let mut base = [0isize; 3];
    let mut frac = [0f32; 3];
    for a in 0..3 {
        if p[a] <= -1.0 || p[a] >= dims[a] as f64 {
            return 0.0;
        }
        let f = p[a].floor();
        base[a] = f as isize;
        frac[a] = (p[a] - f) as f32;
    }
    let at = |x: isize, y: isize, z: isize| -> f32 {
        if x < 0 || y < 0 || z < 0 || x >= nx as isize || y >= ny as isize || z >= nz as isize {
            0.0
        } else {
            src[[x as usize, y as usize, z as usize]]
        }
    };
    let [x, y, z] = base;
    let [fx, fy, fz] = frac;
    let c00 = at(x, y, z) * (1.0 - fz) + at(x, y, z + 1) * fz;
    let c01 = at(x, y + 1, z) * (1.0 - fz) + at(x, y + 1, z + 1) * fz;
    let c10 = at(x + 1, y, z) * (1.0 - fz) + at(x + 1, y, z + 1) * fz;
    let c11 = at(x + 1, y + 1, z) * (1.0 - fz) + at(x + 1, y + 1, z + 1) * fz;
    let c0 = c00 * (1.0 - fy) + c01 * fy;
    let c1 = c10 * (1.0 - fy) + c11 * fy;
    c0 * (1.0 - fx) + c1 * fx
}

/// Nearest-neighbour label lookup at a continuous coordinate; background
/// outside the volume.
pub(crate) fn sample_label(src: &Array3<u16>, p: [f64; 3]) -> u16 {
    let (nx, ny, nz) = src.dim();
    let r = p.map(|c| c.round());
    if r[0] < 0.0 || r[1] < 0.0 || r[2] < 0.0 {
        return 0;
    }
    let (x, y, z) = (r[0] as usize, r[1] as usize, r[2] as usize);
    if x >= nx || y >= ny || z >= nz {
        return 0;
    }
    src[[x, y, z]]
}
