//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p uda-cli --test acceptance` runs everything; trailing
//! numbers (`-- 1 4 12`) select criteria.

mod exact;
mod grad;
mod pipeline;
mod reference;
mod uda;

use std::time::Instant;

/// `Ok(detail)` passes, `Err(detail)` fails.
pub type Outcome = Result<String, String>;

pub fn verdict(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "comparison-table arithmetic", exact::criterion1),
    (2, "balancing arithmetic", exact::criterion2),
    (3, "metric oracles", exact::criterion3),
    (4, "learning-rate schedule", exact::criterion4),
    (5, "focal loss", exact::criterion5),
    (6, "gradient checks", grad::criterion6),
    (7, "frozen source and initialization", uda::criterion7),
    (8, "desk-scale adaptation efficacy", uda::criterion8),
    (9, "domain confusion", uda::criterion9),
    (10, "leave-one-out contract", pipeline::criterion10),
    (11, "pipeline determinism", pipeline::criterion11),
    (12, "dice properties", exact::criterion12),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {n:>2} {tag} {name} [{secs:.1}s]: {detail}");
        if outcome.is_err() {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
