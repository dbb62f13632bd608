//! `uda`: one subcommand per pipeline stage, connected through files.

mod commands;
mod config;
mod output;
mod preds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uda_core::phenotype::Phenotype;
use uda_core::volume::Shape3;
use uda_core::Error;

/// Default parent of output directories when `--out` is omitted.
pub const OUT_ROOT_ENV: &str = "UDA_OUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "uda", version, about = "Domain-adapted phenotype classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: $UDA_OUT_ROOT/<command>, else runs/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic source and target dataset.
    Synth {
        #[arg(long)]
        n_source: Option<usize>,
        #[arg(long)]
        n_target: Option<usize>,
        /// default, none or strong.
        #[arg(long)]
        shift_preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Resize, crop and normalize every volume of a manifest.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// ROI crop shape, e.g. 48,48,24.
        #[arg(long, value_parser = parse_shape)]
        roi: Option<Shape3>,
        /// Resize shape, e.g. 64,64,32.
        #[arg(long, value_parser = parse_shape)]
        resize: Option<Shape3>,
        #[command(flatten)]
        common: Common,
    },
    /// Split a labelled source dataset and train the source classifier.
    TrainSource {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_phenotype)]
        phenotype: Option<Phenotype>,
        #[command(flatten)]
        common: Common,
    },
    /// Adapt a source checkpoint to unlabeled target volumes.
    Adapt {
        #[arg(long)]
        source_ckpt: PathBuf,
        #[arg(long)]
        source_manifest: PathBuf,
        #[arg(long)]
        target_manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out evaluation on the target dataset.
    Loocv {
        #[arg(long)]
        target_manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Required for `--mode uda`.
        #[arg(long)]
        source_ckpt: Option<PathBuf>,
        /// Source volumes streamed during adaptation; required for `--mode uda`.
        #[arg(long)]
        source_manifest: Option<PathBuf>,
        #[arg(long, value_parser = parse_phenotype)]
        phenotype: Option<Phenotype>,
        #[command(flatten)]
        common: Common,
    },
    /// Metrics, bootstrap AUROC and ROC plot for one prediction table.
    Evaluate {
        #[arg(long)]
        preds: PathBuf,
        /// Label table; optional when the predictions carry a label column.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Metrics for two classifiers on the same samples and a McNemar test.
    Compare {
        #[arg(long)]
        preds_a: PathBuf,
        #[arg(long)]
        preds_b: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Uda,
    Nonuda,
}

fn parse_shape(s: &str) -> Result<Shape3, String> {
    let parts: Vec<&str> = s.split([',', 'x']).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated sizes, got `{s}`"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(out)
}

fn parse_phenotype(s: &str) -> Result<Phenotype, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit code for each error class. 1 and 2 are left to panics and
/// argument parsing.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument { .. } => 3,
        Error::Config(_) => 4,
        Error::Balancing(_) => 5,
        Error::Localization(_) => 6,
        Error::UndefinedMetric(_) => 7,
        Error::Training(_) => 8,
        Error::Checkpoint(_) => 9,
        Error::MissingFile(_) => 10,
        Error::DuplicateId(_) => 11,
        Error::Malformed { .. } => 12,
        Error::Io { .. } => 13,
        Error::Json(_) => 14,
    }
}

fn run(cli: Cli) -> uda_core::Result<PathBuf> {
    use commands as c;
    match cli.command {
        Command::Synth {
            n_source,
            n_target,
            shift_preset,
            common,
        } => c::synth(n_source, n_target, shift_preset, &common),
        Command::Preprocess {
            manifest,
            roi,
            resize,
            common,
        } => c::preprocess(&manifest, roi, resize, &common),
        Command::TrainSource {
            manifest,
            phenotype,
            common,
        } => c::train_source(&manifest, phenotype, &common),
        Command::Adapt {
            source_ckpt,
            source_manifest,
            target_manifest,
            common,
        } => c::adapt(&source_ckpt, &source_manifest, &target_manifest, &common),
        Command::Loocv {
            target_manifest,
            mode,
            source_ckpt,
            source_manifest,
            phenotype,
            common,
        } => c::loocv(
            &target_manifest,
            mode,
            source_ckpt.as_deref(),
            source_manifest.as_deref(),
            phenotype,
            &common,
        ),
        Command::Evaluate { preds, labels, common } => c::evaluate(&preds, labels.as_deref(), &common),
        Command::Compare {
            preds_a,
            preds_b,
            labels,
            common,
        } => c::compare(&preds_a, &preds_b, &labels, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::from(exit_code(&e))
        }
    }
}
