//! Leave-one-out cross-validation harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::derive_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub test_index: usize,
    pub train_size: usize,
    pub seed: u64,
    pub prediction: bool,
    pub score: f64,
    pub label: bool,
}

/// Seed handed to fold `fold`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_indexed(seed, "loocv/fold", fold as u64)
}

/// Run one fold per sample. `train_fn(train_indices, fold_seed)` builds a
/// model from every index except the held-out one; `eval_fn(model,
/// test_index)` returns `(prediction, score)` for the held-out sample.
/// Folds may run in parallel; records come back in fold order.
pub fn loocv<M, T, E>(labels: &[bool], seed: u64, train_fn: T, eval_fn: E) -> Result<Vec<FoldRecord>>
where
    T: Fn(&[usize], u64) -> Result<M> + Sync,
    E: Fn(&M, usize) -> Result<(bool, f64)> + Sync,
{
    let n = labels.len();
    if n < 2 {
        return Err(Error::arg("samples", format!("leave-one-out needs at least 2 samples, got {n}")));
    }
    exec::try_map_range(n, |fold| {
        let train: Vec<usize> = (0..n).filter(|&i| i != fold).collect();
        let s = fold_seed(seed, fold);
        let model = train_fn(&train, s)?;
        let (prediction, score) = eval_fn(&model, fold)?;
        Ok(FoldRecord {
            fold,
            test_index: fold,
            train_size: train.len(),
            seed: s,
            prediction,
            score,
            label: labels[fold],
        })
    })
}
