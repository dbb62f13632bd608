//! Volumes, segmentation masks, and their on-disk raw format.
//!
//! A stored array is two files: a JSON header and a raw blob. Voxels are
//! laid out x-major with z fastest, i.e. the flat index of `(x, y, z)` is
//! `(x * ny + y) * nz + z`. Volume blobs are little-endian IEEE-754
//! `float32`; mask blobs are little-endian `uint16`. See `docs/formats.md`.

use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phenotype::PhenotypeLabel;

pub type Shape3 = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Source => "source",
            Domain::Target => "target",
        })
    }
}

/// Segmentation compartment ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u16)]
pub enum Compartment {
    Background = 0,
    FemoralCartilage = 1,
    MedialTibialCartilage = 2,
    LateralTibialCartilage = 3,
    MedialMeniscus = 4,
    LateralMeniscus = 5,
    PatellarCartilage = 6,
}

impl Compartment {
    pub const ALL: [Compartment; 7] = [
        Compartment::Background,
        Compartment::FemoralCartilage,
        Compartment::MedialTibialCartilage,
        Compartment::LateralTibialCartilage,
        Compartment::MedialMeniscus,
        Compartment::LateralMeniscus,
        Compartment::PatellarCartilage,
    ];

    pub fn from_id(id: u16) -> Option<Compartment> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn id(self) -> u16 {
        self as u16
    }
}

/// Label volume whose voxels are [`Compartment`] ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    labels: Array3<u16>,
}

impl SegmentationMask {
    pub fn new(labels: Array3<u16>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&v| Compartment::from_id(v).is_none()) {
            return Err(Error::arg("mask", format!("label {bad} outside the vocabulary")));
        }
        Ok(SegmentationMask { labels })
    }

    pub fn background(shape: Shape3) -> Self {
        SegmentationMask {
            labels: Array3::zeros(shape),
        }
    }

    pub fn labels(&self) -> &Array3<u16> {
        &self.labels
    }

    pub fn shape(&self) -> Shape3 {
        let s = self.labels.dim();
        [s.0, s.1, s.2]
    }

    pub fn set(&mut self, idx: Shape3, c: Compartment) {
        self.labels[idx] = c.id();
    }

    pub(crate) fn from_labels_unchecked(labels: Array3<u16>) -> Self {
        SegmentationMask { labels }
    }
}

/// A 3D intensity volume with its acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSample {
    pub sample_id: String,
    pub voxels: Array3<f32>,
    /// Voxel spacing in millimetres.
    pub spacing: [f64; 3],
    pub domain: Domain,
    pub mask: Option<SegmentationMask>,
    pub label: Option<PhenotypeLabel>,
}

impl VolumeSample {
    pub fn new(
        sample_id: impl Into<String>,
        voxels: Array3<f32>,
        spacing: [f64; 3],
        domain: Domain,
    ) -> Result<Self> {
        if spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::arg("spacing", format!("{spacing:?} must be positive")));
        }
        if voxels.is_empty() {
            return Err(Error::arg("voxels", "empty volume"));
        }
        Ok(VolumeSample {
            sample_id: sample_id.into(),
            voxels,
            spacing,
            domain,
            mask: None,
            label: None,
        })
    }

    pub fn with_mask(mut self, mask: SegmentationMask) -> Result<Self> {
        if mask.shape() != self.shape() {
            return Err(Error::arg(
                "mask",
                format!("shape {:?} differs from volume {:?}", mask.shape(), self.shape()),
            ));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn shape(&self) -> Shape3 {
        let s = self.voxels.dim();
        [s.0, s.1, s.2]
    }

    /// Copy with the label removed; adaptation only ever sees these.
    pub fn unlabeled(&self) -> Self {
        VolumeSample {
            label: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub format: String,
    pub dtype: String,
    pub shape: Shape3,
    pub spacing: [f64; 3],
    pub domain: Domain,
    pub sample_id: String,
    /// Blob file name, relative to the header's directory.
    pub data_file: String,
}

const VOLUME_FORMAT: &str = "uda-volume/1";
const MASK_FORMAT: &str = "uda-mask/1";

fn blob_path(header_path: &Path) -> (PathBuf, String) {
    let stem = header_path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("array")
        .trim_end_matches(".json");
    let name = format!("{stem}.raw");
    (header_path.with_file_name(&name), name)
}

fn write_header(path: &Path, header: &ArrayHeader) -> Result<()> {
    let text = serde_json::to_string_pretty(header)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_header(path: &Path, format: &str, dtype: &str) -> Result<ArrayHeader> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let h: ArrayHeader = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))?;
    if h.format != format || h.dtype != dtype {
        return Err(Error::malformed(
            path.display().to_string(),
            format!("expected {format}/{dtype}, found {}/{}", h.format, h.dtype),
        ));
    }
    Ok(h)
}

fn read_blob(header_path: &Path, h: &ArrayHeader, elem: usize) -> Result<Vec<u8>> {
    let blob = header_path.with_file_name(&h.data_file);
    if !blob.exists() {
        return Err(Error::MissingFile(blob));
    }
    let bytes = std::fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
    let expect = h.shape.iter().product::<usize>() * elem;
    if bytes.len() != expect {
        return Err(Error::malformed(
            blob.display().to_string(),
            format!("{} bytes, expected {expect}", bytes.len()),
        ));
    }
    Ok(bytes)
}

/// Write a volume's intensities (header at `header_path`, blob alongside).
pub fn write_volume(header_path: &Path, v: &VolumeSample) -> Result<()> {
    let (blob, name) = blob_path(header_path);
    let bytes: Vec<u8> = v.voxels.iter().flat_map(|x| x.to_le_bytes()).collect();
    std::fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))?;
    write_header(
        header_path,
        &ArrayHeader {
            format: VOLUME_FORMAT.into(),
            dtype: "float32-le".into(),
            shape: v.shape(),
            spacing: v.spacing,
            domain: v.domain,
            sample_id: v.sample_id.clone(),
            data_file: name,
        },
    )
}

pub fn read_volume(header_path: &Path) -> Result<VolumeSample> {
    let h = read_header(header_path, VOLUME_FORMAT, "float32-le")?;
    let bytes = read_blob(header_path, &h, 4)?;
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let voxels = Array3::from_shape_vec(h.shape, data)
        .map_err(|e| Error::malformed(header_path.display().to_string(), e.to_string()))?;
    VolumeSample::new(h.sample_id, voxels, h.spacing, h.domain)
}

/// Write a mask; spacing/domain/id are copied from the owning volume.
pub fn write_mask(header_path: &Path, mask: &SegmentationMask, owner: &VolumeSample) -> Result<()> {
    let (blob, name) = blob_path(header_path);
    let bytes: Vec<u8> = mask.labels.iter().flat_map(|x| x.to_le_bytes()).collect();
    std::fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))?;
    write_header(
        header_path,
        &ArrayHeader {
            format: MASK_FORMAT.into(),
            dtype: "uint16-le".into(),
            shape: mask.shape(),
            spacing: owner.spacing,
            domain: owner.domain,
            sample_id: owner.sample_id.clone(),
            data_file: name,
        },
    )
}

pub fn read_mask(header_path: &Path) -> Result<SegmentationMask> {
    let h = read_header(header_path, MASK_FORMAT, "uint16-le")?;
    let bytes = read_blob(header_path, &h, 2)?;
    let data: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let labels = Array3::from_shape_vec(h.shape, data)
        .map_err(|e| Error::malformed(header_path.display().to_string(), e.to_string()))?;
    SegmentationMask::new(labels)
}
