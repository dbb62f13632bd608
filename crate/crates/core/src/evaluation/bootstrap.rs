//! Case-level bootstrap of the ROC curve.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::roc::{interp_tpr, roc_auc, roc_curve};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{derive_indexed, rng_from};

/// Attempts allowed per resample before giving up on drawing both classes.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRoc {
    pub mean: f64,
    /// Population standard deviation (divisor `n`) of the resample AUROCs.
    pub sd: f64,
    pub n_resamples: usize,
    pub aucs: Vec<f64>,
    /// `(fpr, tpr)` points of each resample's ROC curve.
    pub curves: Vec<Vec<(f64, f64)>>,
}

/// Row indices of one resample: `n` draws with replacement, redrawn until
/// both classes appear.
pub fn resample_indices(labels: &[bool], seed: u64, resample: usize) -> Result<Vec<usize>> {
    let n = labels.len();
    let mut rng = rng_from(derive_indexed(seed, "bootstrap", resample as u64));
    for _ in 0..MAX_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let pos = idx.iter().filter(|&&i| labels[i]).count();
        if pos > 0 && pos < n {
            return Ok(idx);
        }
    }
    Err(Error::UndefinedMetric(format!(
        "bootstrap resample {resample} lacked a class after {MAX_REDRAWS} draws"
    )))
}

pub fn bootstrap_roc(scores: &[f64], labels: &[bool], n_resamples: usize, seed: u64) -> Result<BootstrapRoc> {
    if n_resamples == 0 {
        return Err(Error::arg("n_resamples", "must be positive"));
    }
    roc_auc(scores, labels)?;
    let per = exec::try_map_range(n_resamples, |r| {
        let idx = resample_indices(labels, seed, r)?;
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        Ok::<_, Error>((roc_auc(&s, &y)?, roc_curve(&s, &y)?))
    })?;
    let (aucs, curves): (Vec<f64>, Vec<_>) = per.into_iter().unzip();
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let sd = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(BootstrapRoc {
        mean,
        sd,
        n_resamples,
        aucs,
        curves,
    })
}

/// Mean TPR and its ±sd band on an evenly spaced FPR grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocBand {
    pub fpr: Vec<f64>,
    pub mean_tpr: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BootstrapRoc {
    pub fn band(&self, points: usize) -> RocBand {
        let points = points.max(2);
        let fpr: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let n = self.curves.len() as f64;
        let mut mean_tpr = Vec::with_capacity(points);
        let mut lower = Vec::with_capacity(points);
        let mut upper = Vec::with_capacity(points);
        for &x in &fpr {
            let ys: Vec<f64> = self.curves.iter().map(|c| interp_tpr(c, x)).collect();
            let m = ys.iter().sum::<f64>() / n;
            let sd = (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / n).sqrt();
            mean_tpr.push(m);
            lower.push((m - sd).max(0.0));
            upper.push((m + sd).min(1.0));
        }
        RocBand {
            fpr,
            mean_tpr,
            lower,
            upper,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_scores_give_unit_mean() {
        let scores = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
        let labels = [false, false, false, true, true, true];
        let b = bootstrap_roc(&scores, &labels, 100, 3).unwrap();
        assert_eq!(b.mean, 1.0);
        assert_eq!(b.sd, 0.0);
        assert_eq!(b.curves.len(), 100);
        assert_eq!(b, bootstrap_roc(&scores, &labels, 100, 3).unwrap());
        let band = b.band(11);
        assert_eq!(band.mean_tpr[0], 1.0);
    }

    #[test]
    fn single_class_hits_the_redraw_cap() {
        let labels = vec![false; 50];
        let err = resample_indices(&labels, 1, 0).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetric(_)));
    }

    #[test]
    fn rare_positive_is_still_drawn() {
        let mut labels = vec![false; 200];
        labels[0] = true;
        let scores: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let b = bootstrap_roc(&scores, &labels, 5, 1).unwrap();
        assert_eq!(b.aucs.len(), 5);
    }
}
