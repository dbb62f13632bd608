//! Run configuration: every module's settings plus the global seed,
//! loaded from JSON and overridden by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uda_core::dataio::ShiftParams;
use uda_core::evaluation::{DEFAULT_FRACTIONS, DEFAULT_THRESHOLD};
use uda_core::phenotype::Phenotype;
use uda_core::preprocess::PreprocessConfig;
use uda_core::rng::derive_seed;
use uda_core::training::{AdaptConfig, SourceTrainConfig};
use uda_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub n_source: usize,
    pub n_target: usize,
    pub shift_preset: String,
    /// Full shift parameters; when set, `shift_preset` is ignored.
    pub shift: Option<ShiftParams>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            n_source: 200,
            n_target: 40,
            shift_preset: "default".into(),
            shift: None,
        }
    }
}

impl SynthSettings {
    pub fn shift_params(&self) -> Result<ShiftParams> {
        match &self.shift {
            Some(p) => Ok(p.clone()),
            None => ShiftParams::preset(&self.shift_preset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub threshold: f64,
    pub bootstrap_resamples: usize,
    pub split_fractions: [f64; 3],
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            threshold: DEFAULT_THRESHOLD,
            bootstrap_resamples: 100,
            split_fractions: DEFAULT_FRACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every stage seed is derived from this one.
    pub seed: u64,
    pub phenotype: Phenotype,
    pub synth: SynthSettings,
    pub preprocess: PreprocessConfig,
    pub source_train: SourceTrainConfig,
    pub adapt: AdaptConfig,
    pub evaluation: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            phenotype: Phenotype::SubchondralBone,
            synth: SynthSettings::default(),
            preprocess: PreprocessConfig::desk(),
            source_train: SourceTrainConfig::desk(),
            adapt: AdaptConfig::desk(),
            evaluation: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let bad = |e: String| Error::Config(format!("{}: {e}", path.display()));
        let file: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let mut merged = serde_json::to_value(RunConfig::default())?;
        merge(&mut merged, file, "").map_err(bad)?;
        serde_json::from_value(merged).map_err(|e| bad(e.to_string()))
    }

    /// Fill the per-stage seeds from the global seed. Called once, after
    /// all overrides, so the resolved config shows the seeds actually used.
    pub fn resolve(mut self) -> Result<Self> {
        self.source_train.seed = derive_seed(self.seed, "source-train");
        self.adapt.seed = derive_seed(self.seed, "adapt");
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.shift_params()?.validate()?;
        if self.synth.n_source == 0 || self.synth.n_target == 0 {
            return Err(Error::Config("synthetic sample counts must be positive".into()));
        }
        self.preprocess.validate()?;
        self.source_train.validate()?;
        self.adapt.validate()?;
        if self.source_train.encoder.input_shape != self.preprocess.crop {
            return Err(Error::Config(format!(
                "encoder input {:?} differs from the preprocessing crop {:?}",
                self.source_train.encoder.input_shape, self.preprocess.crop
            )));
        }
        let e = &self.evaluation;
        if !(0.0..=1.0).contains(&e.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", e.threshold)));
        }
        if e.bootstrap_resamples == 0 {
            return Err(Error::Config("bootstrap resamples must be positive".into()));
        }
        let sum: f64 = e.split_fractions.iter().sum();
        if e.split_fractions.iter().any(|f| !(*f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions {:?} must be positive and sum to 1",
                e.split_fractions
            )));
        }
        Ok(())
    }
}

/// Overlay `patch` onto `base`, recursing into objects so that a partial
/// section keeps the remaining fields of `base`. Keys absent from `base`
/// are rejected.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value, at: &str) -> std::result::Result<(), String> {
    use serde_json::Value;
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None => return Err(format!("unknown field `{path}`")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}
