//! Run the desk-scale adaptation experiment and print one JSON line per
//! seed plus the medians.
//!
//! ```text
//! cargo run --release -p uda-core --example desk_uda -- [config.json] [seeds...]
//! ```

use std::time::Instant;

use uda_core::experiment::{median, run_seed, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).peekable();
    let cfg: ExperimentConfig = match args.peek() {
        Some(a) if a.ends_with(".json") => {
            let path = args.next().expect("peeked");
            serde_json::from_str(&std::fs::read_to_string(path)?)?
        }
        _ => ExperimentConfig::default(),
    };
    let seeds: Vec<u64> = args.map(|a| a.parse()).collect::<Result<_, _>>()?;
    let seeds = if seeds.is_empty() { vec![0, 1, 2, 3, 4] } else { seeds };
    let mut reports = Vec::new();
    for seed in seeds {
        let t = Instant::now();
        let r = run_seed(&cfg, seed)?;
        println!("{} ({:.1}s)", serde_json::to_string(&r)?, t.elapsed().as_secs_f64());
        reports.push(r);
    }
    let med = |f: fn(&uda_core::experiment::SeedReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
    println!(
        "median source_test {:.3} unadapted {:.3} adapted {:.3} nonuda {:.3} discriminator {:.3} -> {:.3} probe {:.3} -> {:.3}",
        med(|r| r.source_test_auroc),
        med(|r| r.unadapted_target_auroc),
        med(|r| r.adapted_target_auroc),
        med(|r| r.nonuda_target_auroc),
        med(|r| r.discriminator_before),
        med(|r| r.discriminator_after),
        med(|r| r.probe_before),
        med(|r| r.probe_after),
    );
    Ok(())
}
