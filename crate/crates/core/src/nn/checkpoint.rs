//! Checkpoint persistence.
//!
//! A checkpoint directory holds `checkpoint.json` (configs, metadata, and
//! the list of arrays with name, shape and dtype) plus one raw
//! little-endian `float32` file per array, named `<array name>.f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::{Encoder, EncoderConfig};
use super::mlp::{Mlp, MlpConfig};
use super::params::{Param, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "uda-checkpoint/1";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// `source`, `adapted` or `nonuda`.
    pub kind: String,
    pub phenotype: Option<String>,
    pub epoch: usize,
    pub selection_metric: Option<String>,
    pub selection_value: Option<f64>,
    pub seed: u64,
}

/// Encoder, head and optional discriminator weights with their configs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: Encoder,
    pub head: Mlp,
    pub discriminator: Option<Mlp>,
    pub meta: CheckpointMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    encoder_config: EncoderConfig,
    head_config: MlpConfig,
    discriminator_config: Option<MlpConfig>,
    metadata: CheckpointMeta,
    arrays: Vec<ArrayEntry>,
}

fn all_params(ck: &Checkpoint) -> Vec<(&'static str, &ParamStore)> {
    let mut v = vec![("encoder", ck.encoder.params()), ("head", ck.head.params())];
    if let Some(d) = &ck.discriminator {
        v.push(("discriminator", d.params()));
    }
    v
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut arrays = Vec::new();
        for (group, store) in all_params(self) {
            for p in store.iter() {
                let name = if p.name.starts_with(group) {
                    p.name.clone()
                } else {
                    format!("{group}.{}", p.name)
                };
                let file = format!("{name}.f32");
                let bytes: Vec<u8> = p.data.iter().flat_map(|x| x.to_le_bytes()).collect();
                let path = dir.join(&file);
                std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
                arrays.push(ArrayEntry {
                    name,
                    shape: p.shape.clone(),
                    dtype: "float32-le".into(),
                    file,
                });
            }
        }
        let header = Header {
            format: CHECKPOINT_FORMAT.into(),
            encoder_config: self.encoder.config().clone(),
            head_config: self.head.config().clone(),
            discriminator_config: self.discriminator.as_ref().map(|d| d.config().clone()),
            metadata: self.meta.clone(),
            arrays,
        };
        let path = dir.join("checkpoint.json");
        std::fs::write(&path, serde_json::to_string_pretty(&header)? + "\n")
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("checkpoint.json");
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: Header = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {}", header.format)));
        }
        let mut encoder = Encoder::new(header.encoder_config.clone(), 0)?;
        let mut head = Mlp::new(header.head_config.clone(), "head", 0)?;
        let mut discriminator = header
            .discriminator_config
            .clone()
            .map(|c| Mlp::new(c, "discriminator", 0))
            .transpose()?;

        let mut loaded: Vec<(String, Param)> = Vec::new();
        for entry in &header.arrays {
            if entry.dtype != "float32-le" {
                return Err(Error::Checkpoint(format!("{}: unsupported dtype {}", entry.name, entry.dtype)));
            }
            let p = dir.join(&entry.file);
            if !p.exists() {
                return Err(Error::MissingFile(p));
            }
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            let n: usize = entry.shape.iter().product();
            if bytes.len() != 4 * n {
                return Err(Error::Checkpoint(format!(
                    "{}: {} bytes for shape {:?}",
                    entry.name,
                    bytes.len(),
                    entry.shape
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let group = entry.name.split('.').next().unwrap_or_default().to_string();
            let local = if group == "encoder" {
                entry.name["encoder.".len()..].to_string()
            } else {
                entry.name.clone()
            };
            loaded.push((
                group,
                Param {
                    name: local,
                    shape: entry.shape.clone(),
                    data,
                },
            ));
        }
        let take = |g: &str| -> Vec<Param> {
            loaded
                .iter()
                .filter(|(grp, _)| grp == g)
                .map(|(_, p)| p.clone())
                .collect()
        };
        encoder.params_mut().load_from(&take("encoder"))?;
        head.params_mut().load_from(&take("head"))?;
        match discriminator.as_mut() {
            Some(d) => d.params_mut().load_from(&take("discriminator"))?,
            None if !take("discriminator").is_empty() => {
                return Err(Error::Checkpoint("discriminator arrays without config".into()))
            }
            None => {}
        }
        Ok(Checkpoint {
            encoder,
            head,
            discriminator,
            meta: header.metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_discriminator, build_head};

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = EncoderConfig {
            input_shape: [8, 8, 4],
            block_layers: vec![1, 1],
            growth_rate: 2,
            initial_channels: 2,
            stem_kernel: 3,
            stem_stride: 1,
            stem_pool: false,
            bottleneck_width: Some(3),
            compression: 0.5,
        };
        let encoder = Encoder::new(cfg, 5).unwrap();
        let f = encoder.feature_dim();
        let ck = Checkpoint {
            encoder,
            head: build_head(f, 6).unwrap(),
            discriminator: Some(build_discriminator(f, &[4], 7).unwrap()),
            meta: CheckpointMeta {
                kind: "adapted".into(),
                epoch: 50,
                seed: 9,
                ..Default::default()
            },
        };
        let dir = tempfile::tempdir().unwrap();
        ck.save(dir.path()).unwrap();
        let back = Checkpoint::load(dir.path()).unwrap();
        assert!(back.encoder.params().bit_identical(ck.encoder.params()));
        assert!(back.head.params().bit_identical(ck.head.params()));
        assert!(back
            .discriminator
            .as_ref()
            .unwrap()
            .params()
            .bit_identical(ck.discriminator.as_ref().unwrap().params()));
        assert_eq!(back.meta, ck.meta);
        assert!(dir.path().join("encoder.stem.weight.f32").exists());
        assert!(dir.path().join("head.out.weight.f32").exists());

        // truncating a blob is caught
        std::fs::write(dir.path().join("head.out.bias.f32"), [0u8; 3]).unwrap();
        assert!(matches!(Checkpoint::load(dir.path()), Err(Error::Checkpoint(_))));
    }
}
