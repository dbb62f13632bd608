//! Adaptation invariants and the desk-scale synthetic experiment.

use std::sync::OnceLock;

use uda_core::dataio::{synthesize, ShiftParams};
use uda_core::experiment::{median, run_seed, ExperimentConfig, SeedReport};
use uda_core::nn::{build_head, Checkpoint, CheckpointMeta, Encoder, EncoderConfig};
use uda_core::preprocess::{preprocess_sample, PreprocessConfig};
use uda_core::training::{adapt_target_observed, AdaptConfig, TargetSample};
use uda_core::volume::{Domain, VolumeSample};

use crate::{verdict, Outcome};

pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn prepared(n: usize, domain: Domain, seed: u64) -> Vec<VolumeSample> {
    let pre = PreprocessConfig::desk();
    synthesize(n, domain, &ShiftParams::default(), seed)
        .unwrap()
        .iter()
        .map(|v| preprocess_sample(v, &pre).unwrap())
        .collect()
}

pub fn criterion7() -> Outcome {
    let encoder = Encoder::new(EncoderConfig::desk(), 70).unwrap();
    let head = build_head(encoder.feature_dim(), 71).unwrap();
    let source = Checkpoint {
        encoder,
        head,
        discriminator: None,
        meta: CheckpointMeta {
            kind: "source".into(),
            phenotype: None,
            epoch: 0,
            selection_metric: None,
            selection_value: None,
            seed: 70,
        },
    };
    let before = source.clone();
    let src = prepared(12, Domain::Source, 72);
    let tgt: Vec<TargetSample> = prepared(6, Domain::Target, 73).iter().map(TargetSample::strip).collect();
    let cfg = AdaptConfig {
        epochs: 2,
        seed: 74,
        ..AdaptConfig::desk()
    };
    let mut at_start = None;
    let mut observed = 0;
    let refs: Vec<&VolumeSample> = src.iter().collect();
    let out = adapt_target_observed(&source, &refs, &tgt, &cfg, |epoch, enc| {
        observed += 1;
        if epoch == 0 {
            at_start = Some(enc.params().bit_identical(source.encoder.params()));
        }
    })
    .unwrap();
    let start_equal = at_start == Some(true);
    let frozen = source.encoder.params().bit_identical(before.encoder.params())
        && source.head.params().bit_identical(before.head.params());
    let moved = !out.checkpoint.encoder.params().bit_identical(before.encoder.params());
    let head_kept = out.checkpoint.head.params().bit_identical(before.head.params());
    verdict(
        start_equal && frozen && moved && head_kept && observed == cfg.epochs + 1,
        format!(
            "step-0 target encoder == source: {start_equal}; source weights unchanged after adaptation: {frozen}; \
             head copied unchanged: {head_kept}; target encoder updated: {moved}"
        ),
    )
}

fn experiment() -> &'static Vec<SeedReport> {
    static RUNS: OnceLock<Vec<SeedReport>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        SEEDS
            .iter()
            .map(|&seed| {
                let started = std::time::Instant::now();
                let r = run_seed(&cfg, seed).unwrap();
                eprintln!(
                    "  seed {seed}: unadapted {:.3} adapted {:.3} non-UDA {:.3} discriminator {:.3} -> {:.3} probe {:.3} -> {:.3} ({:.0}s)",
                    r.unadapted_target_auroc,
                    r.adapted_target_auroc,
                    r.nonuda_target_auroc,
                    r.discriminator_before,
                    r.discriminator_after,
                    r.probe_before,
                    r.probe_after,
                    started.elapsed().as_secs_f64()
                );
                r
            })
            .collect()
    })
}

fn med(f: impl Fn(&SeedReport) -> f64) -> f64 {
    median(&experiment().iter().map(f).collect::<Vec<_>>())
}

pub fn criterion8() -> Outcome {
    let unadapted = med(|r| r.unadapted_target_auroc);
    let adapted = med(|r| r.adapted_target_auroc);
    let nonuda = med(|r| r.nonuda_target_auroc);
    let source = med(|r| r.source_test_auroc);
    verdict(
        adapted >= unadapted + 0.05 && adapted >= nonuda,
        format!(
            "median target AUROC adapted {adapted:.3} vs unadapted {unadapted:.3} (+0.05 -> {:.3}) and non-UDA {nonuda:.3}; \
             source test {source:.3}",
            unadapted + 0.05
        ),
    )
}

pub fn criterion9() -> Outcome {
    let before = med(|r| r.discriminator_before);
    let after = med(|r| r.discriminator_after);
    let probe_before = med(|r| r.probe_before);
    let probe_after = med(|r| r.probe_after);
    verdict(
        before >= 0.9 && after <= 0.75,
        format!(
            "median held-out discriminator accuracy {before:.3} -> {after:.3} (need >= 0.9 then <= 0.75); \
             fresh linear probe {probe_before:.3} -> {probe_after:.3} (informational)"
        ),
    )
}
