//! Adversarial adaptation of a target encoder against a frozen source
//! encoder.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::schedule::lr_schedule;
use super::{batch_rng, check_lr};
use crate::error::{Error, Result};
use crate::exec;
use crate::nn::loss::bce_batch;
use crate::nn::optim::{Sgd, SgdConfig};
use crate::nn::{build_discriminator, Checkpoint, CheckpointMeta, Encoder, EncoderTape, Gradients, Mlp};
use crate::preprocess::{augment, AugmentConfig};
use crate::rng::{derive_indexed, derive_seed, rng_from};
use crate::volume::VolumeSample;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialObjective {
    /// Separate discriminator loss and inverted-label encoder loss.
    #[default]
    InvertedLabel,
    /// Encoder follows the negated discriminator-loss gradient.
    GradientReversal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub batch_size: usize,
    /// Target-encoder optimizer; also used by the discriminator unless
    /// `discriminator_sgd` is set.
    pub sgd: SgdConfig,
    /// Separate discriminator optimizer. The schedule scales both learning
    /// rates by the same factor.
    #[serde(default)]
    pub discriminator_sgd: Option<SgdConfig>,
    pub schedule_gamma: f64,
    pub schedule_lambda: f64,
    pub epochs: usize,
    pub discriminator_hidden: Vec<usize>,
    pub objective: AdversarialObjective,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            batch_size: 2,
            sgd: SgdConfig::default(),
            discriminator_sgd: None,
            schedule_gamma: 0.0003,
            schedule_lambda: 0.75,
            epochs: 50,
            discriminator_hidden: vec![256, 128],
            objective: AdversarialObjective::InvertedLabel,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl AdaptConfig {
    /// Desk-scale settings: the default schedule, epochs and batch size, a
    /// smaller discriminator suited to 30-dimensional features, and
    /// momentum-free SGD with a 10x faster discriminator. With momentum 0.9
    /// and one shared rate the game does not settle within the few hundred
    /// steps a 40-volume target set allows.
    pub fn desk() -> Self {
        let plain = |lr| SgdConfig {
            lr,
            momentum: 0.0,
            ..SgdConfig::default()
        };
        AdaptConfig {
            sgd: plain(1e-3),
            discriminator_sgd: Some(plain(1e-2)),
            discriminator_hidden: vec![64, 32],
            ..AdaptConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        for sgd in std::iter::once(&self.sgd).chain(&self.discriminator_sgd) {
            check_lr("sgd", sgd.lr)?;
            if !(0.0..1.0).contains(&sgd.momentum) || !(sgd.weight_decay >= 0.0) {
                return Err(Error::Config("momentum must lie in [0, 1) and weight decay be non-negative".into()));
            }
        }
        if !(self.schedule_gamma >= 0.0 && self.schedule_lambda >= 0.0) {
            return Err(Error::Config("schedule gamma and lambda must be non-negative".into()));
        }
        if self.discriminator_hidden.contains(&0) {
            return Err(Error::Config("discriminator widths must be positive".into()));
        }
        self.augment.validate()
    }
}

/// A target-domain volume whose label has been removed. Adaptation only
/// accepts these, so target labels cannot leak into it.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSample(VolumeSample);

impl TargetSample {
    pub fn strip(v: &VolumeSample) -> Self {
        TargetSample(v.unlabeled())
    }

    pub fn volume(&self) -> &VolumeSample {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptEpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub discriminator_loss: f64,
    pub encoder_loss: f64,
    /// Training-batch accuracy of the discriminator before its update.
    pub discriminator_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub checkpoint: Checkpoint,
    pub trace: Vec<AdaptEpochRecord>,
}

/// Endless source sampler: a fresh seeded permutation per epoch, and a
/// further one whenever an epoch consumes more than one full pass.
struct SourceStream {
    n: usize,
    seed: u64,
    order: Vec<usize>,
    pos: usize,
    pass: u64,
}

impl SourceStream {
    fn new(n: usize, seed: u64) -> Self {
        SourceStream {
            n,
            seed,
            order: Vec::new(),
            pos: 0,
            pass: 0,
        }
    }

    fn start_epoch(&mut self, epoch: usize) {
        self.seed = derive_indexed(self.seed, "epoch", epoch as u64);
        self.pass = 0;
        self.reshuffle();
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.n).collect();
        self.order.shuffle(&mut rng_from(derive_indexed(self.seed, "pass", self.pass)));
        self.pass += 1;
        self.pos = 0;
    }

    fn next(&mut self) -> usize {
        if self.pos == self.n {
            self.reshuffle();
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

fn stack(rows: &[Array1<f32>]) -> Array2<f32> {
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    ndarray::stack(Axis(0), &views).expect("equal widths")
}

/// Run adversarial adaptation. The returned checkpoint holds the adapted
/// target encoder, the source head copied unchanged, and the final
/// discriminator; it is the state after the last epoch.
pub fn adapt_target(
    source: &Checkpoint,
    source_samples: &[&VolumeSample],
    target: &[TargetSample],
    cfg: &AdaptConfig,
) -> Result<AdaptOutcome> {
    adapt_target_observed(source, source_samples, target, cfg, |_, _| {})
}

/// As [`adapt_target`], calling `observe(epoch, target_encoder)` before
/// each epoch's first update and once more after the last epoch.
pub fn adapt_target_observed(
    source: &Checkpoint,
    source_samples: &[&VolumeSample],
    target: &[TargetSample],
    cfg: &AdaptConfig,
    mut observe: impl FnMut(usize, &Encoder),
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(Error::Config("target set is empty".into()));
    }
    if source_samples.is_empty() {
        return Err(Error::Config("source set is empty".into()));
    }
    if source.head.config().input_dim != source.encoder.feature_dim() {
        return Err(Error::Checkpoint("head does not match the encoder's feature width".into()));
    }
    let src_enc = &source.encoder;
    let mut tgt_enc = source.encoder.clone();
    let mut disc = build_discriminator(
        src_enc.feature_dim(),
        &cfg.discriminator_hidden,
        derive_seed(cfg.seed, "discriminator"),
    )?;
    let d_sgd = cfg.discriminator_sgd.clone().unwrap_or_else(|| cfg.sgd.clone());
    let d_ratio = d_sgd.lr / cfg.sgd.lr;
    let mut opt_d = Sgd::new(d_sgd, disc.params());
    let mut opt_e = Sgd::new(cfg.sgd.clone(), tgt_enc.params());
    let mut stream = SourceStream::new(source_samples.len(), derive_seed(cfg.seed, "source-stream"));
    let mut lr = cfg.sgd.lr;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        observe(epoch, &tgt_enc);
        opt_d.set_lr(lr * d_ratio);
        opt_e.set_lr(lr);
        stream.start_epoch(epoch);
        let epoch_seed = derive_indexed(cfg.seed, "epoch", epoch as u64);
        let order = super::shuffled(target.len(), epoch_seed);
        let (mut d_sum, mut e_sum, mut hits, mut seen, mut batches) = (0.0, 0.0, 0usize, 0usize, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let seed = derive_indexed(epoch_seed, "batch", b as u64);
            let src_idx: Vec<usize> = chunk.iter().map(|_| stream.next()).collect();
            let step = adversarial_step(
                src_enc,
                &mut tgt_enc,
                &mut disc,
                &mut opt_d,
                &mut opt_e,
                &src_idx.iter().map(|&i| source_samples[i]).collect::<Vec<_>>(),
                &chunk.iter().map(|&i| target[i].volume()).collect::<Vec<_>>(),
                cfg,
                seed,
            )?;
            d_sum += step.d_loss;
            e_sum += step.e_loss;
            hits += step.hits;
            seen += step.seen;
            batches += 1;
        }
        let rec = AdaptEpochRecord {
            epoch: epoch + 1,
            lr,
            discriminator_loss: d_sum / batches as f64,
            encoder_loss: e_sum / batches as f64,
            discriminator_accuracy: hits as f64 / seen as f64,
        };
        if !(rec.discriminator_loss.is_finite() && rec.encoder_loss.is_finite()) {
            return Err(Error::Training(format!("adversarial losses diverged at epoch {}", epoch + 1)));
        }
        trace.push(rec);
        lr = lr_schedule(lr, epoch as u64, cfg.schedule_gamma, cfg.schedule_lambda);
    }
    observe(cfg.epochs, &tgt_enc);

    Ok(AdaptOutcome {
        checkpoint: Checkpoint {
            encoder: tgt_enc,
            head: source.head.clone(),
            discriminator: Some(disc),
            meta: CheckpointMeta {
                kind: "adapted".into(),
                phenotype: source.meta.phenotype.clone(),
                epoch: cfg.epochs,
                selection_metric: None,
                selection_value: None,
                seed: cfg.seed,
            },
        },
        trace,
    })
}

/// Train a discriminator with the schedule, batching and seeds that
/// adaptation would use, but against fixed feature rows, with no encoder
/// updates. This is the reference for domain confusion before adaptation.
pub fn train_discriminator_fixed(source: &Array2<f32>, target: &Array2<f32>, cfg: &AdaptConfig) -> Result<Mlp> {
    cfg.validate()?;
    if source.nrows() == 0 || target.nrows() == 0 {
        return Err(Error::Config("feature sets must be non-empty".into()));
    }
    if source.ncols() != target.ncols() {
        return Err(Error::arg("features", "source and target widths differ"));
    }
    let mut disc = build_discriminator(
        source.ncols(),
        &cfg.discriminator_hidden,
        derive_seed(cfg.seed, "discriminator"),
    )?;
    let d_sgd = cfg.discriminator_sgd.clone().unwrap_or_else(|| cfg.sgd.clone());
    let d_ratio = d_sgd.lr / cfg.sgd.lr;
    let mut opt = Sgd::new(d_sgd, disc.params());
    let mut stream = SourceStream::new(source.nrows(), derive_seed(cfg.seed, "source-stream"));
    let mut lr = cfg.sgd.lr;
    for epoch in 0..cfg.epochs {
        opt.set_lr(lr * d_ratio);
        stream.start_epoch(epoch);
        let order = super::shuffled(target.nrows(), derive_indexed(cfg.seed, "epoch", epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            let src_idx: Vec<usize> = chunk.iter().map(|_| stream.next()).collect();
            let fs = source.select(Axis(0), &src_idx);
            let ft = target.select(Axis(0), chunk);
            let (ls, tape_s) = disc.forward_train(&fs)?;
            let (lt, tape_t) = disc.forward_train(&ft)?;
            let (_, g_src) = bce_batch(&ls, &vec![true; fs.nrows()]);
            let (_, g_tgt) = bce_batch(&lt, &vec![false; ft.nrows()]);
            let (mut grads, _) = disc.backward(&tape_s, &g_src);
            grads.add_assign(&disc.backward(&tape_t, &g_tgt).0);
            opt.step(disc.params_mut(), &grads);
        }
        lr = lr_schedule(lr, epoch as u64, cfg.schedule_gamma, cfg.schedule_lambda);
    }
    Ok(disc)
}

/// Balanced accuracy of a domain discriminator (source = positive logit):
/// the mean of its per-domain hit rates.
pub fn discriminator_accuracy(disc: &Mlp, source: &Array2<f32>, target: &Array2<f32>) -> Result<f64> {
    if source.nrows() == 0 || target.nrows() == 0 {
        return Err(Error::arg("features", "both domains need at least one row"));
    }
    let hs = disc.forward(source)?.iter().filter(|&&z| z >= 0.0).count();
    let ht = disc.forward(target)?.iter().filter(|&&z| z < 0.0).count();
    Ok(0.5 * (hs as f64 / source.nrows() as f64 + ht as f64 / target.nrows() as f64))
}

struct StepStats {
    d_loss: f64,
    e_loss: f64,
    hits: usize,
    seen: usize,
}

#[allow(clippy::too_many_arguments)]
fn adversarial_step(
    src_enc: &Encoder,
    tgt_enc: &mut Encoder,
    disc: &mut Mlp,
    opt_d: &mut Sgd,
    opt_e: &mut Sgd,
    src: &[&VolumeSample],
    tgt: &[&VolumeSample],
    cfg: &AdaptConfig,
    seed: u64,
) -> Result<StepStats> {
    let (ns, nt) = (src.len(), tgt.len());
    let enc: &Encoder = tgt_enc;
    // source rows first, then target rows, each with its own augmentation
    let fwd: Vec<(Array1<f32>, Option<EncoderTape>)> = exec::try_map_range(ns + nt, |i| {
        let mut rng = batch_rng(seed, i);
        if i < ns {
            let x = augment(src[i], &cfg.augment, &mut rng);
            Ok::<_, Error>((src_enc.forward(&x.voxels)?, None))
        } else {
            let x = augment(tgt[i - ns], &cfg.augment, &mut rng);
            let (f, tape) = enc.forward_train(&x.voxels)?;
            Ok((f, Some(tape)))
        }
    })?;
    let feats: Vec<Array1<f32>> = fwd.iter().map(|(f, _)| f.clone()).collect();
    let fs = stack(&feats[..ns]);
    let ft = stack(&feats[ns..]);

    // discriminator: source = 1, target = 0, sum of the two domain means
    let (ls, tape_s) = disc.forward_train(&fs)?;
    let (lt, tape_t) = disc.forward_train(&ft)?;
    let hits = ls.iter().filter(|&&z| z >= 0.0).count() + lt.iter().filter(|&&z| z < 0.0).count();
    let (d_src, g_src) = bce_batch(&ls, &vec![true; ns]);
    let (d_tgt, g_tgt) = bce_batch(&lt, &vec![false; nt]);
    let (mut dgrads, _) = disc.backward(&tape_s, &g_src);
    let (dg_t, gx_reversal) = disc.backward(&tape_t, &g_tgt);
    dgrads.add_assign(&dg_t);

    let (e_loss, grad_ft) = match cfg.objective {
        AdversarialObjective::GradientReversal => {
            opt_d.step(disc.params_mut(), &dgrads);
            (d_tgt, gx_reversal.mapv(|g| -g))
        }
        AdversarialObjective::InvertedLabel => {
            opt_d.step(disc.params_mut(), &dgrads);
            let (lt2, tape_t2) = disc.forward_train(&ft)?;
            let (e_loss, g) = bce_batch(&lt2, &vec![true; nt]);
            let (_, gx) = disc.backward(&tape_t2, &g);
            (e_loss, gx)
        }
    };
    let parts: Vec<Gradients> = exec::map_range(nt, |j| {
        let tape = fwd[ns + j].1.as_ref().expect("target tape");
        enc.backward(tape, &grad_ft.row(j).to_owned())
    });
    let egrads = Gradients::sum(parts).expect("non-empty batch");
    opt_e.step(tgt_enc.params_mut(), &egrads);
    Ok(StepStats {
        d_loss: d_src + d_tgt,
        e_loss,
        hits,
        seen: ns + nt,
    })
}
