use ndarray::Array3;

use crate::error::{Error, Result};
use crate::volume::{SegmentationMask, Shape3, VolumeSample};

/// Centre of the bounding box over every non-background voxel, clamped so a
/// `crop_shape` window starting at `center - crop/2` stays inside the volume
/// wherever the volume is large enough.
pub fn locate_roi(mask: &SegmentationMask, crop_shape: Shape3) -> Result<Shape3> {
    let shape = mask.shape();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for ((x, y, z), &v) in mask.labels().indexed_iter() {
        if v != 0 {
            any = true;
            for (a, c) in [x, y, z].into_iter().enumerate() {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
    }
    if !any {
        return Err(Error::Localization("mask has no foreground voxels".into()));
    }
    let mut center = [0usize; 3];
    for a in 0..3 {
        let c = (lo[a] + hi[a]).div_ceil(2);
        let half = crop_shape[a] / 2;
        center[a] = if crop_shape[a] >= shape[a] {
            shape[a] / 2
        } else {
            c.clamp(half, shape[a] - crop_shape[a] + half)
        };
    }
    Ok(center)
}

fn crop_array<T: Copy + Default>(src: &Array3<T>, start: [isize; 3], crop: Shape3) -> Array3<T> {
    let (nx, ny, nz) = src.dim();
    Array3::from_shape_fn(crop, |(i, j, k)| {
        let (x, y, z) = (start[0] + i as isize, start[1] + j as isize, start[2] + k as isize);
        if x < 0 || y < 0 || z < 0 || x >= nx as isize || y >= ny as isize || z >= nz as isize {
            T::default()
        } else {
            src[[x as usize, y as usize, z as usize]]
        }
    })
}

/// Extract a `crop_shape` window whose start is `center - crop/2`; voxels
/// outside the source volume are zero (background for the mask).
pub fn crop_roi(v: &VolumeSample, center: Shape3, crop_shape: Shape3) -> Result<VolumeSample> {
    if crop_shape.contains(&0) {
        return Err(Error::arg("crop_shape", format!("{crop_shape:?} must be positive")));
    }
    let start = [0, 1, 2].map(|a| center[a] as isize - (crop_shape[a] / 2) as isize);
    let voxels = crop_array(&v.voxels, start, crop_shape);
    let mask = v
        .mask
        .as_ref()
        .map(|m| SegmentationMask::from_labels_unchecked(crop_array(m.labels(), start, crop_shape)));
    Ok(VolumeSample {
        sample_id: v.sample_id.clone(),
        voxels,
        spacing: v.spacing,
        domain: v.domain,
        mask,
        label: v.label,
    })
}
