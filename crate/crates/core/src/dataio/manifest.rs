//! Dataset manifests: a JSON list of samples with paths relative to the
//! manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::phenotype::PhenotypeLabel;
use crate::volume::{read_mask, read_volume, Domain, VolumeSample};

pub const MANIFEST_FORMAT: &str = "uda-manifest/1";
/// Version tag of the sub-grade vocabulary and phenotype rule shapes.
pub const VOCABULARY_VERSION: &str = "moaks-30/1";
/// Version tag of the segmentation compartment ids.
pub const COMPARTMENTS_VERSION: &str = "knee-7/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub volume: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PhenotypeLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub format: String,
    pub vocabulary_version: String,
    pub compartments_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Generator settings for synthetic datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

impl Default for ManifestMeta {
    fn default() -> Self {
        ManifestMeta {
            format: MANIFEST_FORMAT.into(),
            vocabulary_version: VOCABULARY_VERSION.into(),
            compartments_version: COMPARTMENTS_VERSION.into(),
            seed: None,
            generator: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub meta: ManifestMeta,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Unique ids and a known format tag.
    pub fn validate(&self) -> Result<()> {
        if self.meta.format != MANIFEST_FORMAT {
            return Err(Error::malformed(
                "manifest",
                format!("unsupported format `{}`", self.meta.format),
            ));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.sample_id.is_empty() {
                return Err(Error::malformed("manifest", "empty sample_id"));
            }
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::DuplicateId(e.sample_id.clone()));
            }
        }
        Ok(())
    }

    /// Every referenced file exists under `base`.
    pub fn check_paths(&self, base: &Path) -> Result<()> {
        for e in &self.entries {
            for p in std::iter::once(&e.volume).chain(e.mask.iter()) {
                let full = base.join(p);
                if !full.exists() {
                    return Err(Error::MissingFile(full));
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, sample_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.sample_id == sample_id)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))?;
    m.validate()?;
    m.check_paths(&base_dir(path))?;
    Ok(m)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Read every entry's volume, mask and labels, in manifest order.
pub fn load_samples(manifest: &DatasetManifest, base: &Path) -> Result<Vec<VolumeSample>> {
    exec::try_map_range(manifest.entries.len(), |i| {
        let e = &manifest.entries[i];
        let mut v = read_volume(&base.join(&e.volume))?;
        if v.sample_id != e.sample_id {
            return Err(Error::malformed(
                e.volume.display().to_string(),
                format!("holds `{}`, manifest says `{}`", v.sample_id, e.sample_id),
            ));
        }
        v.domain = e.domain;
        if let Some(m) = &e.mask {
            v = v.with_mask(read_mask(&base.join(m))?)?;
        }
        v.label = e.labels;
        Ok(v)
    })
}

/// Load a manifest file and all its samples.
pub fn load_dataset(path: &Path) -> Result<(DatasetManifest, Vec<VolumeSample>)> {
    let m = load_manifest(path)?;
    let samples = load_samples(&m, &base_dir(path))?;
    Ok((m, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            sample_id: id.into(),
            volume: PathBuf::from(format!("{id}.vol.json")),
            mask: None,
            domain: Domain::Source,
            labels: Some(PhenotypeLabel {
                cartilage_meniscus: Some(true),
                subchondral_bone: None,
            }),
            split: Some(SplitName::Val),
        }
    }

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest {
            meta: ManifestMeta {
                seed: Some(3),
                ..Default::default()
            },
            entries: vec![entry("a"), entry("b")],
        };
        for id in ["a", "b"] {
            std::fs::write(dir.path().join(format!("{id}.vol.json")), "{}").unwrap();
        }
        let path = dir.path().join("manifest.json");
        save_manifest(&m, &path).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), m);

        std::fs::remove_file(dir.path().join("b.vol.json")).unwrap();
        match load_manifest(&path) {
            Err(Error::MissingFile(p)) => assert!(p.ends_with("b.vol.json")),
            other => panic!("{other:?}"),
        }

        let dup = DatasetManifest {
            entries: vec![entry("a"), entry("a")],
            ..m.clone()
        };
        assert!(matches!(save_manifest(&dup, &path), Err(Error::DuplicateId(_))));
        std::fs::write(&path, serde_json::to_string(&dup).unwrap()).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::DuplicateId(_))));

        std::fs::write(&path, "{\"meta\": 1}").unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));
        assert_ne!(err.code(), Error::DuplicateId(String::new()).code());
    }
}
