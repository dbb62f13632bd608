//! Stratified train/validation/test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.10, 0.20];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

const PPM: u64 = 1_000_000;

/// Split sizes: floors of `n·f_i`, leftovers to the largest remainders.
/// Equal remainders go to the smaller fraction first, then to the later
/// split.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(*f > 0.0) || *f >= 1.0) {
        return Err(Error::arg("fractions", format!("{fractions:?} must lie in (0, 1)")));
    }
    let parts: Vec<u64> = fractions.iter().map(|f| (f * PPM as f64).round() as u64).collect();
    if parts.iter().sum::<u64>() != PPM {
        return Err(Error::arg("fractions", format!("{fractions:?} must sum to 1")));
    }
    let n64 = n as u64;
    let mut sizes = [0usize; 3];
    let mut rems = [0u64; 3];
    for i in 0..3 {
        sizes[i] = (n64 * parts[i] / PPM) as usize;
        rems[i] = n64 * parts[i] % PPM;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(parts[a].cmp(&parts[b])).then(b.cmp(&a)));
    let leftover = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(leftover) {
        sizes[i] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::arg(
            "ids",
            format!("{n} samples cannot fill every split of {fractions:?}"),
        ));
    }
    Ok(sizes)
}

/// Indices ordered so that every contiguous chunk holds both classes in
/// proportion: within each class members are shuffled and placed at
/// quantile positions `(2r+1)/(2m)`, then the classes are merged by
/// position.
fn stratified_order(labels: &[bool], seed: u64) -> Vec<usize> {
    let mut keyed: Vec<(u64, u64, bool, usize)> = Vec::with_capacity(labels.len());
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = rng_from(derive_seed(seed, if class { "split/pos" } else { "split/neg" }));
        members.shuffle(&mut rng);
        let m = members.len() as u64;
        for (r, &i) in members.iter().enumerate() {
            keyed.push((2 * r as u64 + 1, 2 * m, class, i));
        }
    }
    keyed.sort_by(|a, b| {
        ((a.0 as u128) * (b.1 as u128))
            .cmp(&((b.0 as u128) * (a.1 as u128)))
            .then(b.2.cmp(&a.2))
            .then(a.3.cmp(&b.3))
    });
    keyed.into_iter().map(|k| k.3).collect()
}

/// Seeded stratified two-way split of indices `0..labels.len()` into
/// `(kept, held_out)`. The held-out size is `round(n · fraction)`, at
/// least 1 and at most `n − 1`; both parts must contain both classes.
pub fn stratified_holdout(labels: &[bool], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg("fraction", format!("{fraction} outside (0, 1)")));
    }
    if n < 4 {
        return Err(Error::arg("labels", format!("{n} samples are too few to hold out")));
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let order = stratified_order(labels, seed);
    let (keep, hold) = order.split_at(n - k);
    let both = |part: &[usize]| part.iter().any(|&i| labels[i]) && part.iter().any(|&i| !labels[i]);
    if !both(keep) || !both(hold) {
        return Err(Error::Config(format!(
            "holding out {k} of {n} samples leaves a part with one class"
        )));
    }
    let (mut keep, mut hold) = (keep.to_vec(), hold.to_vec());
    keep.sort_unstable();
    hold.sort_unstable();
    Ok((keep, hold))
}

/// Seeded stratified split: the stratified order cut into contiguous
/// train, validation and test chunks.
pub fn split_source(ids: &[String], labels: &[bool], fractions: [f64; 3], seed: u64) -> Result<Split> {
    if ids.len() != labels.len() {
        return Err(Error::arg("labels", "one label per id required"));
    }
    if ids.len() < 3 {
        return Err(Error::arg("ids", "at least 3 samples required"));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(d) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::DuplicateId(d.clone()));
    }
    let sizes = split_sizes(ids.len(), fractions)?;

    let order: Vec<String> = stratified_order(labels, seed).into_iter().map(|i| ids[i].clone()).collect();
    let (train, rest) = order.split_at(sizes[0]);
    let (val, test) = rest.split_at(sizes[1]);
    Ok(Split {
        train: train.to_vec(),
        val: val.to_vec(),
        test: test.to_vec(),
    })
}
