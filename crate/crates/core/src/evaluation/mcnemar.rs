//! Paired comparison of two classifiers on the same cases.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Discordant totals up to this use the exact binomial test.
pub const EXACT_MAX_DISCORDANT: u64 = 25;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Cases classifier A got right and B got wrong.
    pub b: u64,
    /// Cases classifier A got wrong and B got right.
    pub c: u64,
    pub p_value: f64,
    pub method: McNemarMethod,
    pub no_discordance: bool,
    pub significant: bool,
}

/// Exact two-sided binomial p-value for `b` vs `c` discordant pairs.
pub fn exact_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let mut term: u128 = 1; // C(n, 0)
    let mut tail: u128 = 0;
    for i in 0..=k {
        tail += term;
        term = term * (n - i) as u128 / (i + 1) as u128;
    }
    (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
}

/// Continuity-corrected chi-square statistic with one degree of freedom.
pub fn chi_square_p(b: u64, c: u64) -> f64 {
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / (b + c) as f64;
    let dist = ChiSquared::new(1.0).expect("one degree of freedom");
    dist.sf(stat)
}

pub fn mcnemar_counts(b: u64, c: u64) -> McNemarResult {
    let (p_value, method) = if b + c <= EXACT_MAX_DISCORDANT {
        (exact_p(b, c), McNemarMethod::ExactBinomial)
    } else {
        (chi_square_p(b, c), McNemarMethod::ChiSquareCorrected)
    };
    McNemarResult {
        b,
        c,
        p_value,
        method,
        no_discordance: b + c == 0,
        significant: p_value < SIGNIFICANCE_LEVEL,
    }
}

pub fn mcnemar(preds_a: &[bool], preds_b: &[bool], labels: &[bool]) -> Result<McNemarResult> {
    if preds_a.len() != labels.len() || preds_b.len() != labels.len() {
        return Err(Error::arg(
            "preds",
            format!(
                "lengths differ: {} / {} / {} labels",
                preds_a.len(),
                preds_b.len(),
                labels.len()
            ),
        ));
    }
    let (mut b, mut c) = (0, 0);
    for ((&a, &bb), &y) in preds_a.iter().zip(preds_b).zip(labels) {
        match (a == y, bb == y) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c))
}
