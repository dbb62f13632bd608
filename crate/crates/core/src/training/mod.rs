//! Source classifier training, adversarial target-encoder adaptation, the
//! target-only baseline, and the learning-rate schedule.

mod adapt;
mod classifier;
mod schedule;
mod stop;

use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::Serialize;

pub use adapt::{
    adapt_target, adapt_target_observed, discriminator_accuracy, train_discriminator_fixed, AdaptConfig,
    AdaptEpochRecord, AdaptOutcome, AdversarialObjective, TargetSample,
};
pub use classifier::{
    encode, phenotype_labels, train_nonuda_baseline, train_source, SourceEpochRecord, SourceTrainConfig,
    TrainOutcome, BASELINE_VAL_FRACTION,
};
pub use schedule::{lr_for_epoch, lr_schedule};
pub use stop::{EarlyStopper, StopMode};

use crate::error::{Error, Result};
use crate::nn::loss::sigmoid;
use crate::nn::{Encoder, Mlp};
use crate::rng::{derive_indexed, rng_from, Rng};
use crate::volume::VolumeSample;

fn check_lr(name: &str, lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} learning rate must be positive")))
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut rng_from(derive_indexed(seed, "shuffle", 0)));
    v
}

/// Augmentation stream for position `i` of a minibatch.
fn batch_rng(seed: u64, i: usize) -> Rng {
    rng_from(derive_indexed(seed, "sample", i as u64))
}

fn features_of(encoder: &Encoder, samples: &[&VolumeSample]) -> Result<Array2<f32>> {
    let xs: Vec<_> = samples.iter().map(|s| &s.voxels).collect();
    encoder.features(&xs)
}

/// Head logits for unaugmented samples.
pub fn predict_logits(encoder: &Encoder, head: &Mlp, samples: &[&VolumeSample]) -> Result<Array1<f32>> {
    if samples.is_empty() {
        return Ok(Array1::zeros(0));
    }
    head.forward(&features_of(encoder, samples)?)
}

/// Positive-class probabilities for unaugmented samples.
pub fn predict_scores(encoder: &Encoder, head: &Mlp, samples: &[&VolumeSample]) -> Result<Vec<f64>> {
    Ok(predict_logits(encoder, head, samples)?
        .iter()
        .map(|&z| sigmoid(z as f64))
        .collect())
}

/// Per-sample feature rows as `f64`, for probes.
pub fn feature_rows(encoder: &Encoder, samples: &[&VolumeSample]) -> Result<Array2<f64>> {
    Ok(features_of(encoder, samples)?.mapv(|v| v as f64))
}

/// Write one JSON object per line.
pub fn write_trace<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
