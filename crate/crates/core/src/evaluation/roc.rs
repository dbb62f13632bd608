//! ROC and precision-recall summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact Mann-Whitney AUROC: `numerator / denominator` where the
/// numerator counts each correctly ordered positive-negative pair twice
/// and each tied pair once, and the denominator is `2 · P · N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Auc {
    pub numerator: u128,
    pub denominator: u128,
}

impl Auc {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::arg(
            "labels",
            format!("{} scores vs {} labels", scores.len(), labels.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::arg("scores", "NaN score"));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC/PR curves need at least one positive and one negative".into(),
        ));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Runs of equal scores in descending order: `(positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[bool]) -> Vec<(u64, u64)> {
    let idx = order_desc(scores);
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut last: Option<f64> = None;
    for i in idx {
        if last != Some(scores[i]) {
            groups.push((0, 0));
            last = Some(scores[i]);
        }
        let g = groups.last_mut().expect("pushed");
        if labels[i] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

/// Exact AUROC with half credit for ties.
pub fn roc_auc_exact(scores: &[f64], labels: &[bool]) -> Result<Auc> {
    let (pos, neg) = check(scores, labels)?;
    let mut neg_below: u128 = neg as u128;
    let mut num: u128 = 0;
    for (p, n) in tie_groups(scores, labels) {
        neg_below -= n as u128;
        num += 2 * p as u128 * neg_below + p as u128 * n as u128;
    }
    Ok(Auc {
        numerator: num,
        denominator: 2 * pos as u128 * neg as u128,
    })
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    roc_auc_exact(scores, labels).map(|a| a.value())
}

/// ROC curve points `(fpr, tpr)` from `(0,0)` to `(1,1)`, one point per
/// distinct threshold.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check(scores, labels)?;
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(pts)
}

/// Area under the precision-recall curve as average precision:
/// `Σ (R_k − R_{k−1}) · P_k` over descending thresholds.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Linear interpolation of a ROC curve's TPR at `fpr`.
pub fn interp_tpr(curve: &[(f64, f64)], fpr: f64) -> f64 {
    let mut best = 0.0f64;
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if fpr >= x0 && fpr <= x1 {
            let t = if x1 > x0 { (fpr - x0) / (x1 - x0) } else { 1.0 };
            best = best.max(y0 + t * (y1 - y0));
        }
    }
    best
}
