//! Supervised encoder + head training shared by the source classifier and
//! the target-only baseline.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::stop::{EarlyStopper, StopMode};
use super::{batch_rng, check_lr, features_of, predict_logits};
use crate::error::{Error, Result};
use crate::evaluation::auprc;
use crate::exec;
use crate::nn::loss::{focal_batch, sigmoid};
use crate::nn::optim::{Adam, AdamConfig};
use crate::nn::{build_head, Checkpoint, CheckpointMeta, Encoder, EncoderConfig, Gradients};
use crate::phenotype::Phenotype;
use crate::preprocess::{augment, AugmentConfig};
use crate::rng::derive_seed;
use crate::volume::VolumeSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub focal_gamma: f64,
    /// Validation-loss increases tolerated before stopping.
    pub patience: usize,
    pub stop_mode: StopMode,
    pub max_epochs: usize,
    pub encoder: EncoderConfig,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for SourceTrainConfig {
    fn default() -> Self {
        SourceTrainConfig {
            batch_size: 2,
            adam: AdamConfig::default(),
            focal_gamma: 1.0,
            patience: 3,
            stop_mode: StopMode::Cumulative,
            max_epochs: 100,
            encoder: EncoderConfig::desk(),
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl SourceTrainConfig {
    /// Settings that converge within a few minutes on the desk-scale
    /// encoder and synthetic data. Differs from the default only in the
    /// learning rate and epoch cap.
    pub fn desk() -> Self {
        SourceTrainConfig {
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            max_epochs: 30,
            ..SourceTrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and max epochs must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.focal_gamma >= 0.0) {
            return Err(Error::Config("focal gamma must be non-negative".into()));
        }
        check_lr("adam", self.adam.lr)?;
        if !(self.adam.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        self.encoder.validate()?;
        self.augment.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auprc: f64,
    pub val_increases: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub trace: Vec<SourceEpochRecord>,
    pub stopped_early: bool,
}

/// Extract the binary label for `phenotype` from every sample.
pub fn phenotype_labels(samples: &[&VolumeSample], phenotype: Phenotype) -> Result<Vec<bool>> {
    samples
        .iter()
        .map(|s| {
            s.label.and_then(|l| l.get(phenotype)).ok_or_else(|| {
                Error::Config(format!("sample `{}` has no {phenotype:?} label", s.sample_id))
            })
        })
        .collect()
}

/// One focal-loss gradient step on a minibatch; returns the batch loss.
#[allow(clippy::too_many_arguments)]
fn batch_step(
    encoder: &mut Encoder,
    head: &mut crate::nn::Mlp,
    opt_e: &mut Adam,
    opt_h: &mut Adam,
    batch: &[&VolumeSample],
    labels: &[bool],
    cfg: &SourceTrainConfig,
    seed: u64,
) -> Result<f64> {
    let enc: &Encoder = encoder;
    let fwd = exec::try_map_range(batch.len(), |i| {
        let mut rng = batch_rng(seed, i);
        let x = augment(batch[i], &cfg.augment, &mut rng);
        enc.forward_train(&x.voxels)
    })?;
    let f = enc.feature_dim();
    let mut feats = Array2::<f32>::zeros((batch.len(), f));
    for (mut row, (v, _)) in feats.axis_iter_mut(Axis(0)).zip(&fwd) {
        row.assign(v);
    }
    let (logits, htape) = head.forward_train(&feats)?;
    let (loss, glogits) = focal_batch(&logits, labels, cfg.focal_gamma);
    let (hgrads, gx) = head.backward(&htape, &glogits);
    let parts: Vec<Gradients> = exec::map_range(batch.len(), |i| {
        let g: Array1<f32> = gx.row(i).to_owned();
        enc.backward(&fwd[i].1, &g)
    });
    let egrads = Gradients::sum(parts).expect("non-empty batch");
    opt_e.step(encoder.params_mut(), &egrads);
    opt_h.step(head.params_mut(), &hgrads);
    Ok(loss)
}

/// Train an encoder and head with focal loss, stop on validation-loss
/// increases, and keep the epoch with the best validation AUPRC.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_classifier(
    train: &[&VolumeSample],
    train_labels: &[bool],
    val: &[&VolumeSample],
    val_labels: &[bool],
    cfg: &SourceTrainConfig,
    kind: &str,
    phenotype: Option<Phenotype>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    if val_labels.iter().all(|&y| y) || !val_labels.iter().any(|&y| y) {
        return Err(Error::Config(
            "validation split holds one class only; AUPRC is undefined".into(),
        ));
    }
    let mut encoder = Encoder::new(cfg.encoder.clone(), derive_seed(cfg.seed, "encoder"))?;
    let mut head = build_head(encoder.feature_dim(), derive_seed(cfg.seed, "head"))?;
    let mut opt_e = Adam::new(cfg.adam.clone(), encoder.params());
    let mut opt_h = Adam::new(cfg.adam.clone(), head.params());
    let mut stopper = EarlyStopper::new(cfg.stop_mode, cfg.patience);
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, Encoder, crate::nn::Mlp)> = None;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let epoch_seed = crate::rng::derive_indexed(cfg.seed, "epoch", epoch as u64);
        let order = super::shuffled(train.len(), epoch_seed);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&VolumeSample> = chunk.iter().map(|&i| train[i]).collect();
            let labels: Vec<bool> = chunk.iter().map(|&i| train_labels[i]).collect();
            let seed = crate::rng::derive_indexed(epoch_seed, "batch", b as u64);
            let loss = batch_step(&mut encoder, &mut head, &mut opt_e, &mut opt_h, &batch, &labels, cfg, seed)?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Training(format!("training loss diverged at epoch {epoch}")));
        }

        let logits = predict_logits(&encoder, &head, val)?;
        let (val_loss, _) = focal_batch(&logits, val_labels, cfg.focal_gamma);
        let scores: Vec<f64> = logits.iter().map(|&z| sigmoid(z as f64)).collect();
        let val_auprc = auprc(&scores, val_labels)?;
        let stop = stopper.observe(val_loss);
        trace.push(SourceEpochRecord {
            epoch,
            lr: cfg.adam.lr,
            train_loss,
            val_loss,
            val_auprc,
            val_increases: stopper.increases(),
        });
        if best.as_ref().is_none_or(|b| val_auprc > b.0) {
            best = Some((val_auprc, epoch, encoder.clone(), head.clone()));
        }
        if stop {
            stopped_early = true;
            break;
        }
    }
    let (value, epoch, encoder, head) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            encoder,
            head,
            discriminator: None,
            meta: CheckpointMeta {
                kind: kind.into(),
                phenotype: phenotype.map(|p| p.as_str().to_string()),
                epoch,
                selection_metric: Some("val_auprc".into()),
                selection_value: Some(value),
                seed: cfg.seed,
            },
        },
        trace,
        stopped_early,
    })
}

/// Source classifier for one phenotype.
pub fn train_source(
    train: &[&VolumeSample],
    val: &[&VolumeSample],
    phenotype: Phenotype,
    cfg: &SourceTrainConfig,
) -> Result<TrainOutcome> {
    let ytr = phenotype_labels(train, phenotype)?;
    let yval = phenotype_labels(val, phenotype)?;
    fit_classifier(train, &ytr, val, &yval, cfg, "source", Some(phenotype))
}

/// Fraction of the target training samples held out for early stopping
/// and model selection in the target-only baseline.
pub const BASELINE_VAL_FRACTION: f64 = 0.2;

/// Target-only classifier trained with the source hyper-parameters. A
/// stratified fifth of `train` is held out as its validation split.
pub fn train_nonuda_baseline(
    train: &[&VolumeSample],
    phenotype: Phenotype,
    cfg: &SourceTrainConfig,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Config("target training set is empty".into()));
    }
    let labels = phenotype_labels(train, phenotype)?;
    let (keep, hold) = crate::evaluation::stratified_holdout(
        &labels,
        BASELINE_VAL_FRACTION,
        derive_seed(cfg.seed, "baseline-holdout"),
    )?;
    let pick = |idx: &[usize]| -> (Vec<&VolumeSample>, Vec<bool>) {
        (idx.iter().map(|&i| train[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let (tr, ytr) = pick(&keep);
    let (va, yva) = pick(&hold);
    fit_classifier(&tr, &ytr, &va, &yva, cfg, "nonuda", Some(phenotype))
}

/// Features of unaugmented samples, one row each.
pub fn encode(encoder: &Encoder, samples: &[&VolumeSample]) -> Result<Array2<f32>> {
    features_of(encoder, samples)
}
