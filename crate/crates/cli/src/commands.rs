use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use uda_core::dataio::{generate_synthetic, load_dataset, write_dataset, ManifestMeta, SplitName};
use uda_core::evaluation::{
    bootstrap_roc, classification_metrics, eval_report, loocv as run_loocv, mcnemar, roc_auc, roc_svg, split_source,
    ClassificationMetrics,
};
use uda_core::exec;
use uda_core::nn::Checkpoint;
use uda_core::phenotype::Phenotype;
use uda_core::preprocess::preprocess_sample;
use uda_core::rng::derive_seed;
use uda_core::training::{
    adapt_target, phenotype_labels, predict_scores, train_nonuda_baseline, train_source as fit_source, write_trace,
    TargetSample,
};
use uda_core::volume::{Domain, Shape3, VolumeSample};
use uda_core::{Error, Result};

use crate::config::RunConfig;
use crate::output::Staging;
use crate::preds::{labels_for, read_labels, read_predictions, write_labels, write_predictions, LabelRow, PredictionRow};
use crate::{Common, Mode, OUT_ROOT_ENV};

fn out_dir(common: &Common, command: &str) -> PathBuf {
    if let Some(p) = &common.out {
        return p.clone();
    }
    let root = std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(command)
}

/// Load the config file, apply `--seed` and the command's own overrides,
/// then resolve and validate before any work starts.
fn resolve(common: &Common, edit: impl FnOnce(&mut RunConfig)) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    edit(&mut cfg);
    cfg.resolve()
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    inputs: serde_json::Value,
    results: T,
}

fn finish<T: Serialize>(
    stage: Staging,
    command: &str,
    cfg: &RunConfig,
    inputs: serde_json::Value,
    results: T,
) -> Result<PathBuf> {
    stage.write_json("resolved_config.json", cfg)?;
    stage.write_json(
        "report.json",
        &Report {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            results,
        },
    )?;
    stage.commit()
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn missing(arg: &'static str, why: &str) -> Error {
    Error::InvalidArgument {
        arg,
        reason: why.into(),
    }
}

fn label_rows(samples: &[VolumeSample], phenotype: Phenotype) -> Vec<LabelRow> {
    samples
        .iter()
        .filter_map(|s| {
            s.label.and_then(|l| l.get(phenotype)).map(|label| LabelRow {
                sample_id: s.sample_id.clone(),
                label,
            })
        })
        .collect()
}

fn positives(samples: &[VolumeSample], phenotype: Phenotype) -> usize {
    samples
        .iter()
        .filter(|s| s.label.and_then(|l| l.get(phenotype)) == Some(true))
        .count()
}

pub fn synth(
    n_source: Option<usize>,
    n_target: Option<usize>,
    shift_preset: Option<String>,
    common: &Common,
) -> Result<PathBuf> {
    let cfg = resolve(common, |c| {
        if let Some(n) = n_source {
            c.synth.n_source = n;
        }
        if let Some(n) = n_target {
            c.synth.n_target = n;
        }
        if let Some(p) = shift_preset {
            c.synth.shift_preset = p;
            c.synth.shift = None;
        }
    })?;
    let shift = cfg.synth.shift_params()?;
    let stage = Staging::new(&out_dir(common, "synth"))?;
    let mut summary = serde_json::Map::new();
    for (domain, n) in [(Domain::Source, cfg.synth.n_source), (Domain::Target, cfg.synth.n_target)] {
        let dir = stage.join(domain.to_string());
        let seed = derive_seed(cfg.seed, &format!("synth/{domain}"));
        generate_synthetic(n, domain, &shift, seed, &dir)?;
        let (_, samples) = load_dataset(&dir.join("manifest.json"))?;
        write_labels(&dir.join("labels.csv"), &label_rows(&samples, cfg.phenotype))?;
        summary.insert(
            domain.to_string(),
            json!({
                "n": n,
                "manifest": format!("{domain}/manifest.json"),
                "positives": {
                    "cartilage_meniscus": positives(&samples, Phenotype::CartilageMeniscus),
                    "subchondral_bone": positives(&samples, Phenotype::SubchondralBone),
                },
            }),
        );
    }
    finish(stage, "synth", &cfg, json!({}), summary)
}

pub fn preprocess(manifest: &Path, roi: Option<Shape3>, resize: Option<Shape3>, common: &Common) -> Result<PathBuf> {
    let cfg = resolve(common, |c| {
        if let Some(r) = roi {
            c.preprocess.crop = r;
            c.source_train.encoder.input_shape = r;
        }
        if let Some(r) = resize {
            c.preprocess.resize_to = r;
        }
    })?;
    let (m, raw) = load_dataset(manifest)?;
    let processed = exec::try_map_range(raw.len(), |i| preprocess_sample(&raw[i], &cfg.preprocess))?;
    let stage = Staging::new(&out_dir(common, "preprocess"))?;
    let meta = ManifestMeta {
        seed: m.meta.seed,
        generator: Some(json!({
            "preprocess": cfg.preprocess,
            "input": m.meta.generator,
        })),
        ..ManifestMeta::default()
    };
    write_dataset(&processed, stage.path(), meta)?;
    let results = json!({
        "n": processed.len(),
        "shape": processed.first().map(|s| s.shape()),
        "manifest": "manifest.json",
    });
    finish(stage, "preprocess", &cfg, json!({ "manifest": show(manifest) }), results)
}

fn prediction_rows(samples: &[&VolumeSample], scores: &[f64], labels: &[bool], threshold: f64) -> Vec<PredictionRow> {
    samples
        .iter()
        .zip(scores)
        .zip(labels)
        .map(|((s, &score), &label)| PredictionRow {
            sample_id: s.sample_id.clone(),
            prediction: score >= threshold,
            score: Some(score),
            label: Some(label),
        })
        .collect()
}

/// Write `roc.svg` when both classes are present.
fn write_roc(stage: &Staging, scores: &[f64], labels: &[bool], cfg: &RunConfig, title: &str) -> Result<()> {
    let b = bootstrap_roc(
        scores,
        labels,
        cfg.evaluation.bootstrap_resamples,
        derive_seed(cfg.seed, "bootstrap"),
    )?;
    let path = stage.join("roc.svg");
    std::fs::write(&path, roc_svg(&b, title)).map_err(|e| Error::Io { path, source: e })
}

pub fn train_source(manifest: &Path, phenotype: Option<Phenotype>, common: &Common) -> Result<PathBuf> {
    let cfg = resolve(common, |c| {
        if let Some(p) = phenotype {
            c.phenotype = p;
        }
    })?;
    let (_, samples) = load_dataset(manifest)?;
    let refs: Vec<&VolumeSample> = samples.iter().collect();
    let labels = phenotype_labels(&refs, cfg.phenotype)?;
    let ids: Vec<String> = samples.iter().map(|s| s.sample_id.clone()).collect();
    let split = split_source(&ids, &labels, cfg.evaluation.split_fractions, derive_seed(cfg.seed, "split"))?;
    let pick = |names: &[String]| -> Vec<&VolumeSample> {
        names
            .iter()
            .map(|n| samples.iter().find(|s| &s.sample_id == n).expect("split ids come from the manifest"))
            .collect()
    };
    let (train, val, test) = (pick(&split.train), pick(&split.val), pick(&split.test));
    let outcome = fit_source(&train, &val, cfg.phenotype, &cfg.source_train)?;
    let ck = &outcome.checkpoint;

    let test_labels = phenotype_labels(&test, cfg.phenotype)?;
    let scores = predict_scores(&ck.encoder, &ck.head, &test)?;
    let test_report = eval_report(
        &scores,
        &test_labels,
        cfg.evaluation.threshold,
        Some((cfg.evaluation.bootstrap_resamples, derive_seed(cfg.seed, "bootstrap"))),
    )?;

    let stage = Staging::new(&out_dir(common, "train-source"))?;
    ck.save(&stage.join("checkpoint"))?;
    write_trace(&stage.join("trace.jsonl"), &outcome.trace)?;
    let assignments: Vec<_> = [
        (SplitName::Train, &split.train),
        (SplitName::Val, &split.val),
        (SplitName::Test, &split.test),
    ]
    .into_iter()
    .flat_map(|(name, ids)| ids.iter().map(move |id| json!({ "sample_id": id, "split": name })))
    .collect();
    stage.write_json("split.json", &assignments)?;
    write_predictions(
        &stage.join("test_predictions.csv"),
        &prediction_rows(&test, &scores, &test_labels, cfg.evaluation.threshold),
    )?;
    write_roc(&stage, &scores, &test_labels, &cfg, "source test")?;
    let results = json!({
        "phenotype": cfg.phenotype,
        "split_sizes": [split.train.len(), split.val.len(), split.test.len()],
        "epochs_run": outcome.trace.len(),
        "stopped_early": outcome.stopped_early,
        "selected_epoch": ck.meta.epoch,
        "selection_metric": ck.meta.selection_metric,
        "selection_value": ck.meta.selection_value,
        "test": test_report,
        "checkpoint": "checkpoint",
    });
    finish(stage, "train-source", &cfg, json!({ "manifest": show(manifest) }), results)
}

/// Source volumes used while adapting: the manifest's training split when
/// it has one, otherwise every entry.
fn adaptation_sources(manifest: &Path) -> Result<Vec<VolumeSample>> {
    let (m, samples) = load_dataset(manifest)?;
    let train: Vec<VolumeSample> = samples
        .iter()
        .zip(&m.entries)
        .filter(|(_, e)| e.split == Some(SplitName::Train))
        .map(|(s, _)| s.clone())
        .collect();
    Ok(if train.is_empty() { samples } else { train })
}

pub fn adapt(source_ckpt: &Path, source_manifest: &Path, target_manifest: &Path, common: &Common) -> Result<PathBuf> {
    let cfg = resolve(common, |_| {})?;
    let ck = Checkpoint::load(source_ckpt)?;
    let source = adaptation_sources(source_manifest)?;
    let (_, target) = load_dataset(target_manifest)?;
    let src_refs: Vec<&VolumeSample> = source.iter().collect();
    let stripped: Vec<TargetSample> = target.iter().map(TargetSample::strip).collect();
    let outcome = adapt_target(&ck, &src_refs, &stripped, &cfg.adapt)?;

    let stage = Staging::new(&out_dir(common, "adapt"))?;
    outcome.checkpoint.save(&stage.join("checkpoint"))?;
    write_trace(&stage.join("trace.jsonl"), &outcome.trace)?;
    let last = outcome.trace.last().expect("at least one epoch");
    let results = json!({
        "n_source": source.len(),
        "n_target": target.len(),
        "epochs": outcome.trace.len(),
        "final": last,
        "checkpoint": "checkpoint",
    });
    let inputs = json!({
        "source_ckpt": show(source_ckpt),
        "source_manifest": show(source_manifest),
        "target_manifest": show(target_manifest),
    });
    finish(stage, "adapt", &cfg, inputs, results)
}

pub fn loocv(
    target_manifest: &Path,
    mode: Mode,
    source_ckpt: Option<&Path>,
    source_manifest: Option<&Path>,
    phenotype: Option<Phenotype>,
    common: &Common,
) -> Result<PathBuf> {
    let cfg = resolve(common, |c| {
        if let Some(p) = phenotype {
            c.phenotype = p;
        }
    })?;
    let (_, target) = load_dataset(target_manifest)?;
    let refs: Vec<&VolumeSample> = target.iter().collect();
    let labels = phenotype_labels(&refs, cfg.phenotype)?;
    let threshold = cfg.evaluation.threshold;
    let loocv_seed = derive_seed(cfg.seed, "loocv");
    let score_one = |ck: &Checkpoint, i: usize| -> Result<(bool, f64)> {
        let s = predict_scores(&ck.encoder, &ck.head, &refs[i..=i])?[0];
        Ok((s >= threshold, s))
    };

    let folds = match mode {
        Mode::Uda => {
            let ck_path = source_ckpt.ok_or_else(|| missing("source_ckpt", "required with --mode uda"))?;
            let src_path = source_manifest.ok_or_else(|| missing("source_manifest", "required with --mode uda"))?;
            let ck = Checkpoint::load(ck_path)?;
            let source = adaptation_sources(src_path)?;
            let src_refs: Vec<&VolumeSample> = source.iter().collect();
            let stripped: Vec<TargetSample> = target.iter().map(TargetSample::strip).collect();
            run_loocv(
                &labels,
                loocv_seed,
                |idx, seed| {
                    let mut ac = cfg.adapt.clone();
                    ac.seed = seed;
                    let fold_targets: Vec<TargetSample> = idx.iter().map(|&i| stripped[i].clone()).collect();
                    Ok(adapt_target(&ck, &src_refs, &fold_targets, &ac)?.checkpoint)
                },
                score_one,
            )?
        }
        Mode::Nonuda => run_loocv(
            &labels,
            loocv_seed,
            |idx, seed| {
                let mut sc = cfg.source_train.clone();
                sc.seed = seed;
                let fold: Vec<&VolumeSample> = idx.iter().map(|&i| refs[i]).collect();
                Ok(train_nonuda_baseline(&fold, cfg.phenotype, &sc)?.checkpoint)
            },
            score_one,
        )?,
    };

    let scores: Vec<f64> = folds.iter().map(|f| f.score).collect();
    let report = eval_report(
        &scores,
        &labels,
        threshold,
        Some((cfg.evaluation.bootstrap_resamples, derive_seed(cfg.seed, "bootstrap"))),
    )?;
    let stage = Staging::new(&out_dir(common, "loocv"))?;
    stage.write_json("folds.json", &folds)?;
    write_predictions(
        &stage.join("predictions.csv"),
        &prediction_rows(&refs, &scores, &labels, threshold),
    )?;
    write_roc(&stage, &scores, &labels, &cfg, &format!("leave-one-out, {mode:?}"))?;
    let results = json!({
        "mode": mode,
        "phenotype": cfg.phenotype,
        "n_folds": folds.len(),
        "eval": report,
    });
    let inputs = json!({
        "target_manifest": show(target_manifest),
        "source_ckpt": source_ckpt.map(show),
        "source_manifest": source_manifest.map(show),
    });
    finish(stage, "loocv", &cfg, inputs, results)
}

#[derive(Serialize)]
struct Percentages {
    sensitivity: String,
    specificity: String,
    accuracy: String,
}

#[derive(Serialize)]
struct ClassifierSummary {
    #[serde(flatten)]
    metrics: ClassificationMetrics,
    /// Two-decimal display values, as in published tables.
    percent: Percentages,
    auroc: Option<f64>,
}

fn summarize(rows: &[PredictionRow], labels: &[bool]) -> Result<ClassifierSummary> {
    let preds: Vec<bool> = rows.iter().map(|r| r.prediction).collect();
    let metrics = classification_metrics(&preds, labels)?;
    let scores: Option<Vec<f64>> = rows.iter().map(|r| r.score).collect();
    let has_both = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
    let auroc = match scores {
        Some(s) if has_both => Some(roc_auc(&s, labels)?),
        _ => None,
    };
    Ok(ClassifierSummary {
        percent: Percentages {
            sensitivity: metrics.sensitivity.percent_text(),
            specificity: metrics.specificity.percent_text(),
            accuracy: metrics.accuracy.percent_text(),
        },
        metrics,
        auroc,
    })
}

fn labels_from(rows: &[PredictionRow], labels: Option<&Path>, preds: &Path) -> Result<Vec<bool>> {
    match labels {
        Some(p) => labels_for(rows, &read_labels(p)?, p),
        None => rows
            .iter()
            .map(|r| {
                r.label.ok_or_else(|| Error::Malformed {
                    what: show(preds),
                    reason: format!("no label for `{}` and no --labels table given", r.sample_id),
                })
            })
            .collect(),
    }
}

pub fn evaluate(preds: &Path, labels: Option<&Path>, common: &Common) -> Result<PathBuf> {
    let cfg = resolve(common, |_| {})?;
    let rows = read_predictions(preds)?;
    let y = labels_from(&rows, labels, preds)?;
    let scores: Vec<f64> = rows
        .iter()
        .map(|r| r.score)
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Malformed {
            what: show(preds),
            reason: "evaluate needs a score column".into(),
        })?;
    let report = eval_report(
        &scores,
        &y,
        cfg.evaluation.threshold,
        Some((cfg.evaluation.bootstrap_resamples, derive_seed(cfg.seed, "bootstrap"))),
    )?;
    let stage = Staging::new(&out_dir(common, "evaluate"))?;
    write_roc(&stage, &scores, &y, &cfg, "evaluation")?;
    let inputs = json!({ "preds": show(preds), "labels": labels.map(show) });
    finish(stage, "evaluate", &cfg, inputs, report)
}

pub fn compare(preds_a: &Path, preds_b: &Path, labels: &Path, common: &Common) -> Result<PathBuf> {
    let cfg = resolve(common, |_| {})?;
    let a = read_predictions(preds_a)?;
    let b_rows = read_predictions(preds_b)?;
    if a.len() != b_rows.len() {
        return Err(Error::Malformed {
            what: show(preds_b),
            reason: format!("{} rows, `{}` has {}", b_rows.len(), show(preds_a), a.len()),
        });
    }
    // align B to A's sample order
    let b: Vec<PredictionRow> = a
        .iter()
        .map(|ra| {
            b_rows
                .iter()
                .find(|rb| rb.sample_id == ra.sample_id)
                .cloned()
                .ok_or_else(|| Error::Malformed {
                    what: show(preds_b),
                    reason: format!("no row for sample `{}`", ra.sample_id),
                })
        })
        .collect::<Result<_>>()?;
    let y = labels_for(&a, &read_labels(labels)?, labels)?;
    let pa: Vec<bool> = a.iter().map(|r| r.prediction).collect();
    let pb: Vec<bool> = b.iter().map(|r| r.prediction).collect();
    let results = json!({
        "n": y.len(),
        "a": summarize(&a, &y)?,
        "b": summarize(&b, &y)?,
        "mcnemar": mcnemar(&pa, &pb, &y)?,
    });
    let stage = Staging::new(&out_dir(common, "compare"))?;
    let inputs = json!({ "preds_a": show(preds_a), "preds_b": show(preds_b), "labels": show(labels) });
    finish(stage, "compare", &cfg, inputs, results)
}
