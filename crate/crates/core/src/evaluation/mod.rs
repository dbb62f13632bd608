//! Classification metrics, bootstrap, paired tests, splits and
//! leave-one-out orchestration.

mod bootstrap;
mod loocv;
mod mcnemar;
mod metrics;
mod plot;
mod probe;
mod report;
mod roc;
mod split;

pub use bootstrap::{bootstrap_roc, resample_indices, BootstrapRoc, RocBand, MAX_REDRAWS};
pub use loocv::{fold_seed, loocv, FoldRecord};
pub use mcnemar::{
    chi_square_p, exact_p, mcnemar, mcnemar_counts, McNemarMethod, McNemarResult, EXACT_MAX_DISCORDANT,
    SIGNIFICANCE_LEVEL,
};
pub use metrics::{classification_metrics, ClassificationMetrics, ConfusionMatrix};
pub use plot::roc_svg;
pub use probe::{domain_probe_accuracy, LogisticProbe};
pub use report::{eval_report, BootstrapSummary, EvalReport, DEFAULT_THRESHOLD};
pub use roc::{auprc, interp_tpr, roc_auc, roc_auc_exact, roc_curve, Auc};
pub use split::{split_sizes, split_source, stratified_holdout, Split, DEFAULT_FRACTIONS};
pub use crate::preprocess::dsc;
