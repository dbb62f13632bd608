//! Criteria exercised through the command-line binary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use uda_core::evaluation::loocv;

use crate::{verdict, Outcome};

fn uda(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_uda"))
        .args(args)
        .current_dir(cwd)
        .env_remove("UDA_OUT_ROOT")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("uda {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

pub fn criterion10() -> Outcome {
    // the harness itself, with a recording trainer
    let labels: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
    let recs = loocv(
        &labels,
        10,
        |train, _| Ok(train.to_vec()),
        |train: &Vec<usize>, i| {
            let ok = train.len() == 49 && !train.contains(&i);
            Ok((ok, i as f64))
        },
    )
    .unwrap();
    let core_ok = recs.len() == 50 && recs.iter().all(|r| r.prediction);

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cheap.json"), r#"{"source_train": {"max_epochs": 1}, "evaluation": {"bootstrap_resamples": 20}}"#)
        .unwrap();
    uda(d, &["synth", "--n-source", "2", "--n-target", "50", "--seed", "10", "--out", "raw"])?;
    uda(d, &["preprocess", "--manifest", "raw/target/manifest.json", "--out", "tgt"])?;
    uda(
        d,
        &["loocv", "--target-manifest", "tgt/manifest.json", "--mode", "nonuda", "--config", "cheap.json", "--out", "lo"],
    )?;
    let folds = json(&d.join("lo/folds.json"));
    let folds = folds.as_array().unwrap();
    let tested: BTreeSet<u64> = folds.iter().map(|f| f["test_index"].as_u64().unwrap()).collect();
    let sizes_ok = folds.iter().all(|f| f["train_size"] == 49);
    let partition = tested == (0..50).collect() && folds.len() == 50;
    let preds = std::fs::read_to_string(d.join("lo/predictions.csv")).unwrap();
    let ids: BTreeSet<&str> = preds.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    verdict(
        core_ok && sizes_ok && partition && ids.len() == 50,
        format!(
            "harness: {} folds, each trained on 49 without its test index: {core_ok}; \
             CLI: {} folds, train size 49: {sizes_ok}, test singletons partition 0..50: {partition}, {} distinct predicted ids",
            recs.len(),
            folds.len(),
            ids.len()
        ),
    )
}

/// Reduced sizes keep two full runs within a few minutes on one core.
pub const PIPELINE_CONFIG: &str = r#"{
  "seed": 11,
  "synth": { "n_source": 60, "n_target": 10 },
  "source_train": { "max_epochs": 3 },
  "adapt": { "epochs": 3 },
  "evaluation": { "bootstrap_resamples": 50 }
}"#;

fn pipeline(d: &Path) -> Result<(), String> {
    std::fs::write(d.join("run.json"), PIPELINE_CONFIG).unwrap();
    let c = ["--config", "run.json"];
    let with = |args: &[&'static str]| [args, &c[..]].concat();
    uda(d, &with(&["synth", "--out", "raw"]))?;
    uda(d, &with(&["preprocess", "--manifest", "raw/source/manifest.json", "--out", "src"]))?;
    uda(d, &with(&["preprocess", "--manifest", "raw/target/manifest.json", "--out", "tgt"]))?;
    uda(d, &with(&["train-source", "--manifest", "src/manifest.json", "--out", "source"]))?;
    uda(
        d,
        &with(&[
            "adapt",
            "--source-ckpt",
            "source/checkpoint",
            "--source-manifest",
            "src/manifest.json",
            "--target-manifest",
            "tgt/manifest.json",
            "--out",
            "adapted",
        ]),
    )?;
    uda(
        d,
        &with(&[
            "loocv",
            "--target-manifest",
            "tgt/manifest.json",
            "--mode",
            "uda",
            "--source-ckpt",
            "source/checkpoint",
            "--source-manifest",
            "src/manifest.json",
            "--out",
            "loocv",
        ]),
    )
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

pub fn criterion11() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let reports: Vec<&PathBuf> = ta.keys().filter(|p| p.ends_with("report.json")).collect();
    let differing: Vec<String> = ta
        .keys()
        .chain(tb.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|p| ta.get(*p) != tb.get(*p))
        .map(|p| p.display().to_string())
        .collect();
    verdict(
        reports.len() == 6 && differing.is_empty(),
        format!(
            "synth, preprocess x2, train-source, adapt, loocv run twice: {} reports and {} files compared, {} differ {}",
            reports.len(),
            ta.len(),
            differing.len(),
            differing.join(" ")
        ),
    )
}
