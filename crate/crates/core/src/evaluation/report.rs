use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap_roc;
use super::metrics::{classification_metrics, ClassificationMetrics};
use super::roc::roc_auc;
use crate::error::{Error, Result};

/// Probability cut-off for a positive call.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub sd: f64,
    pub n_resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub auroc: f64,
    pub auroc_bootstrap: Option<BootstrapSummary>,
    pub threshold: f64,
    #[serde(flatten)]
    pub metrics: ClassificationMetrics,
}

/// Metrics for probability scores; a score at or above `threshold` is a
/// positive call. `bootstrap` is `(n_resamples, seed)`.
pub fn eval_report(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    bootstrap: Option<(usize, u64)>,
) -> Result<EvalReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::arg("threshold", format!("{threshold} outside [0, 1]")));
    }
    let preds: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let metrics = classification_metrics(&preds, labels)?;
    let auroc = roc_auc(scores, labels)?;
    let auroc_bootstrap = match bootstrap {
        Some((n, seed)) => {
            let b = bootstrap_roc(scores, labels, n, seed)?;
            Some(BootstrapSummary {
                mean: b.mean,
                sd: b.sd,
                n_resamples: n,
            })
        }
        None => None,
    };
    Ok(EvalReport {
        n: labels.len(),
        auroc,
        auroc_bootstrap,
        threshold,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        let r = eval_report(&[0.5, 0.2, 0.9, 0.4], &[true, false, true, true], 0.5, Some((10, 1))).unwrap();
        assert_eq!(r.metrics.confusion.tp, 2);
        assert_eq!(r.metrics.confusion.fn_, 1);
        assert_eq!(r.auroc, 1.0);
        assert_eq!(r.auroc_bootstrap.as_ref().unwrap().n_resamples, 10);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["confusion"]["fn"], 1);
        assert!(eval_report(&[0.5], &[true], 1.5, None).is_err());
    }
}
