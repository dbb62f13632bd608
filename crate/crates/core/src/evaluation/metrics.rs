use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::Ratio;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(preds: &[bool], labels: &[bool]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::arg(
                "labels",
                format!("{} predictions vs {} labels", preds.len(), labels.len()),
            ));
        }
        let mut m = ConfusionMatrix::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p, y) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Ratio {
        Ratio::new(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Ratio {
        Ratio::new(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> Ratio {
        Ratio::new(self.tp + self.tn, self.total())
    }
}

/// Thresholded-classifier summary with exact count ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub confusion: ConfusionMatrix,
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub accuracy: Ratio,
}

impl From<ConfusionMatrix> for ClassificationMetrics {
    fn from(confusion: ConfusionMatrix) -> Self {
        ClassificationMetrics {
            confusion,
            sensitivity: confusion.sensitivity(),
            specificity: confusion.specificity(),
            accuracy: confusion.accuracy(),
        }
    }
}

pub fn classification_metrics(preds: &[bool], labels: &[bool]) -> Result<ClassificationMetrics> {
    if preds.is_empty() {
        return Err(Error::arg("preds", "empty prediction list"));
    }
    Ok(ConfusionMatrix::from_predictions(preds, labels)?.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_counts() {
        let preds = [true, true, false, false, true];
        let labels = [true, false, false, true, true];
        let m = classification_metrics(&preds, &labels).unwrap();
        assert_eq!(m.confusion, ConfusionMatrix { tp: 2, fp: 1, tn: 1, fn_: 1 });
        assert_eq!(m.sensitivity, Ratio::new(2, 3));
        assert_eq!(m.specificity, Ratio::new(1, 2));
        assert_eq!(m.accuracy, Ratio::new(3, 5));
        assert!(classification_metrics(&[true], &[true, false]).is_err());
        let perfect = classification_metrics(&labels, &labels).unwrap();
        assert_eq!(perfect.accuracy.percent_text(), "100");
        assert_eq!(perfect.sensitivity.percent_text(), "100");
        assert_eq!(perfect.specificity.percent_text(), "100");
    }
}
