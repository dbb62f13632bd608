//! Desk-scale domain-adaptation experiment on synthetic data.
//!
//! Per seed: generate source and target phantoms, preprocess, split the
//! source set, train a source classifier, then score the target set three
//! ways: the unadapted source classifier, the adapted classifier, and a
//! target-only classifier cross-fitted over k folds of the target samples.
//! Adaptation either uses every unlabeled target volume (transductive) or
//! is cross-fitted like the baseline.
//!
//! Domain confusion is measured on held-out features: the source test
//! split against a fresh set of target volumes that adaptation never saw.
//! Two measures are reported. The first is the adversarial
//! discriminator's accuracy, compared against a discriminator trained the
//! same way on the frozen source encoder's features. The second is a fresh
//! logistic probe fitted before and after adaptation.

use serde::{Deserialize, Serialize};

use crate::dataio::{synthesize, ShiftParams};
use crate::error::{Error, Result};
use crate::evaluation::{domain_probe_accuracy, roc_auc, split_source, DEFAULT_FRACTIONS};
use crate::exec;
use crate::phenotype::Phenotype;
use crate::preprocess::{preprocess_sample, PreprocessConfig};
use crate::rng::{derive_indexed, derive_seed};
use crate::nn::Checkpoint;
use crate::training::{
    adapt_target, discriminator_accuracy, feature_rows, phenotype_labels, predict_scores, train_discriminator_fixed,
    train_nonuda_baseline, train_source, AdaptConfig, SourceTrainConfig, TargetSample,
};
use crate::volume::{Domain, VolumeSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_source: usize,
    pub n_target: usize,
    pub phenotype: Phenotype,
    pub shift: ShiftParams,
    pub preprocess: PreprocessConfig,
    pub source_train: SourceTrainConfig,
    pub adapt: AdaptConfig,
    /// Cross-fitting folds over the target set (`n_target` gives
    /// leave-one-out).
    pub target_folds: usize,
    /// Adapt once on all unlabeled target volumes instead of per fold.
    pub transductive_adaptation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_source: 200,
            n_target: 40,
            phenotype: Phenotype::SubchondralBone,
            shift: ShiftParams::default(),
            preprocess: PreprocessConfig::desk(),
            source_train: SourceTrainConfig::desk(),
            adapt: AdaptConfig::desk(),
            target_folds: 2,
            transductive_adaptation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    /// Source classifier on the held-out source test split.
    pub source_test_auroc: f64,
    /// Source classifier applied to the target set without adaptation.
    pub unadapted_target_auroc: f64,
    pub adapted_target_auroc: f64,
    pub nonuda_target_auroc: f64,
    /// Held-out balanced accuracy of a discriminator trained on frozen
    /// source-encoder features.
    pub discriminator_before: f64,
    /// Same for the adversarial discriminator, target features from the
    /// adapted encoder.
    pub discriminator_after: f64,
    /// Fresh logistic probe, source encoder.
    pub probe_before: f64,
    /// Fresh logistic probe, adapted encoder.
    pub probe_after: f64,
    pub source_epochs: usize,
}

/// Generate and preprocess one domain's samples.
pub fn prepared(n: usize, domain: Domain, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<VolumeSample>> {
    let raw = synthesize(n, domain, &cfg.shift, seed)?;
    exec::try_map_range(raw.len(), |i| preprocess_sample(&raw[i], &cfg.preprocess))
}

/// Stratified assignment of `labels` to `k` folds.
fn fold_of(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        use rand::seq::SliceRandom;
        members.shuffle(&mut crate::rng::rng_from(derive_seed(seed, if class { "pos" } else { "neg" })));
        for (r, &i) in members.iter().enumerate() {
            fold[i] = r % k;
        }
    }
    fold
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    if cfg.target_folds < 2 || cfg.target_folds > cfg.n_target {
        return Err(Error::Config(format!(
            "target folds {} must lie in [2, {}]",
            cfg.target_folds, cfg.n_target
        )));
    }
    let source = prepared(cfg.n_source, Domain::Source, cfg, derive_seed(seed, "source-data"))?;
    let target = prepared(cfg.n_target, Domain::Target, cfg, derive_seed(seed, "target-data"))?;
    let holdout = prepared(cfg.n_target, Domain::Target, cfg, derive_seed(seed, "target-holdout"))?;
    let src_refs: Vec<&VolumeSample> = source.iter().collect();
    let ids: Vec<String> = source.iter().map(|s| s.sample_id.clone()).collect();
    let src_labels = phenotype_labels(&src_refs, cfg.phenotype)?;
    let split = split_source(&ids, &src_labels, DEFAULT_FRACTIONS, derive_seed(seed, "split"))?;
    let pick = |names: &[String]| -> Vec<&VolumeSample> {
        names
            .iter()
            .map(|n| source.iter().find(|s| &s.sample_id == n).expect("split id"))
            .collect()
    };
    let (train, val, test) = (pick(&split.train), pick(&split.val), pick(&split.test));

    let mut st = cfg.source_train.clone();
    st.seed = derive_seed(seed, "source-train");
    let outcome = train_source(&train, &val, cfg.phenotype, &st)?;
    let ck = &outcome.checkpoint;

    let test_labels = phenotype_labels(&test, cfg.phenotype)?;
    let source_test_auroc = roc_auc(&predict_scores(&ck.encoder, &ck.head, &test)?, &test_labels)?;

    let tgt_refs: Vec<&VolumeSample> = target.iter().collect();
    let tgt_labels = phenotype_labels(&tgt_refs, cfg.phenotype)?;
    let unadapted = predict_scores(&ck.encoder, &ck.head, &tgt_refs)?;
    let unadapted_target_auroc = roc_auc(&unadapted, &tgt_labels)?;

    let folds = fold_of(&tgt_labels, cfg.target_folds, derive_seed(seed, "target-folds"));
    let n = target.len();
    let mut adapted = vec![0.0; n];
    let mut baseline = vec![0.0; n];
    let mut first: Option<(Checkpoint, AdaptConfig)> = None;
    let mut adapt_on = |ac_seed: u64, train_idx: &[usize], score_idx: &[usize]| -> Result<()> {
        let stripped: Vec<TargetSample> = train_idx.iter().map(|&i| TargetSample::strip(&target[i])).collect();
        let mut ac = cfg.adapt.clone();
        ac.seed = ac_seed;
        let ad = adapt_target(ck, &train, &stripped, &ac)?.checkpoint;
        let refs: Vec<&VolumeSample> = score_idx.iter().map(|&i| &target[i]).collect();
        let scores = predict_scores(&ad.encoder, &ad.head, &refs)?;
        for (j, &i) in score_idx.iter().enumerate() {
            adapted[i] = scores[j];
        }
        first.get_or_insert((ad, ac));
        Ok(())
    };
    if cfg.transductive_adaptation {
        let all: Vec<usize> = (0..n).collect();
        adapt_on(derive_seed(seed, "adapt"), &all, &all)?;
    }
    for k in 0..cfg.target_folds {
        let inside_idx: Vec<usize> = (0..n).filter(|&i| folds[i] != k).collect();
        let held: Vec<usize> = (0..n).filter(|&i| folds[i] == k).collect();
        if !cfg.transductive_adaptation {
            adapt_on(derive_indexed(seed, "adapt", k as u64), &inside_idx, &held)?;
        }
        let inside: Vec<&VolumeSample> = inside_idx.iter().map(|&i| &target[i]).collect();
        let held_refs: Vec<&VolumeSample> = held.iter().map(|&i| &target[i]).collect();
        let mut bc = cfg.source_train.clone();
        bc.seed = derive_indexed(seed, "baseline", k as u64);
        let base = train_nonuda_baseline(&inside, cfg.phenotype, &bc)?.checkpoint;
        let scores = predict_scores(&base.encoder, &base.head, &held_refs)?;
        for (j, &i) in held.iter().enumerate() {
            baseline[i] = scores[j];
        }
    }
    let (ad, ac) = first.expect("at least one adaptation run");

    let f32s = |x: ndarray::Array2<f64>| x.mapv(|v| v as f32);
    let hold_refs: Vec<&VolumeSample> = holdout.iter().collect();
    let src_test = feature_rows(&ck.encoder, &test)?;
    let hold_before = feature_rows(&ck.encoder, &hold_refs)?;
    let hold_after = feature_rows(&ad.encoder, &hold_refs)?;
    let src_train = f32s(feature_rows(&ck.encoder, &train)?);
    let tgt_before = f32s(feature_rows(&ck.encoder, &tgt_refs)?);
    let reference = train_discriminator_fixed(&src_train, &tgt_before, &ac)?;
    let disc = ad.discriminator.as_ref().expect("adapted checkpoint carries its discriminator");
    let probe_seed = derive_seed(seed, "probe");
    Ok(SeedReport {
        seed,
        source_test_auroc,
        unadapted_target_auroc,
        adapted_target_auroc: roc_auc(&adapted, &tgt_labels)?,
        nonuda_target_auroc: roc_auc(&baseline, &tgt_labels)?,
        discriminator_before: discriminator_accuracy(&reference, &f32s(src_test.clone()), &f32s(hold_before.clone()))?,
        discriminator_after: discriminator_accuracy(disc, &f32s(src_test.clone()), &f32s(hold_after.clone()))?,
        probe_before: domain_probe_accuracy(&src_test, &hold_before, probe_seed)?,
        probe_after: domain_probe_accuracy(&src_test, &hold_after, probe_seed)?,
        source_epochs: outcome.trace.len(),
    })
}

/// Median of a non-empty list (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
