use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Proper fraction `num/den` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(Error::arg(
                "positive_fraction",
                format!("{num}/{den} is not in (0, 1)"),
            ));
        }
        Ok(Fraction { num, den })
    }

    pub fn one_third() -> Self {
        Fraction { num: 1, den: 3 }
    }

    /// Negatives needed to pair with `positives`: round-half-up of
    /// `positives * (1 - f) / f`.
    pub fn negatives_for(&self, positives: u64) -> u64 {
        let num = 2 * positives as u128 * (self.den - self.num) as u128 + self.num as u128;
        (num / (2 * self.num as u128)) as u64
    }
}

/// Keep every positive and a seeded uniform sample of negatives so that the
/// positive fraction equals `positive_fraction`. Ids come back in input
/// order.
pub fn balance_dataset(
    labels: &[(String, bool)],
    positive_fraction: Fraction,
    seed: u64,
) -> Result<Vec<String>> {
    Fraction::new(positive_fraction.num, positive_fraction.den)?;
    let positives = labels.iter().filter(|(_, y)| *y).count() as u64;
    if positives == 0 {
        return Err(Error::Balancing("no positive samples".into()));
    }
    let mut negatives: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, (_, y))| !*y)
        .map(|(i, _)| i)
        .collect();
    let needed = positive_fraction.negatives_for(positives) as usize;
    if negatives.len() < needed {
        return Err(Error::Balancing(format!(
            "{positives} positives need {needed} negatives, only {} available",
            negatives.len()
        )));
    }
    let mut rng = rng_from(seed);
    negatives.shuffle(&mut rng);
    let keep: HashSet<usize> = negatives[..needed].iter().copied().collect();
    Ok(labels
        .iter()
        .enumerate()
        .filter(|(i, (_, y))| *y || keep.contains(i))
        .map(|(_, (id, _))| id.clone())
        .collect())
}
