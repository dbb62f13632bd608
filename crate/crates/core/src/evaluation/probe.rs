//! Logistic-regression probe used to measure how separable two feature
//! populations are.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

/// Standardized-input logistic regression fitted by full-batch gradient
/// descent with an L2 penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProbe {
    mean: Array1<f64>,
    scale: Array1<f64>,
    w: Array1<f64>,
    b: f64,
}

const ITERS: usize = 2000;
const STEP: f64 = 0.5;
const L2: f64 = 1e-3;

impl LogisticProbe {
    pub fn fit(x: &Array2<f64>, y: &[bool]) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || n != y.len() {
            return Err(Error::arg("x", format!("{n} rows for {} labels", y.len())));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x
            .var_axis(Axis(0), 0.0)
            .mapv(|v| if v > 1e-24 { v.sqrt() } else { 1.0 });
        let z = (x - &mean) / &scale;
        let t: Array1<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let mut w = Array1::<f64>::zeros(d);
        let mut b = 0.0;
        for _ in 0..ITERS {
            let logits = z.dot(&w) + b;
            let r = logits.mapv(|l| 1.0 / (1.0 + (-l).exp())) - &t;
            let gw = z.t().dot(&r) / n as f64 + L2 * &w;
            let gb = r.sum() / n as f64;
            w -= &(STEP * gw);
            b -= STEP * gb;
        }
        Ok(LogisticProbe { mean, scale, w, b })
    }

    pub fn logit(&self, x: ArrayView1<f64>) -> f64 {
        ((&x - &self.mean) / &self.scale).dot(&self.w) + self.b
    }

    pub fn accuracy(&self, x: &Array2<f64>, y: &[bool]) -> f64 {
        let hits = x
            .axis_iter(Axis(0))
            .zip(y)
            .filter(|(row, &t)| (self.logit(*row) >= 0.0) == t)
            .count();
        hits as f64 / y.len() as f64
    }
}

/// Held-out accuracy of a fresh probe separating population `a` from `b`.
///
/// Both populations are subsampled to the smaller size so chance level is
/// 0.5, shuffled, and split in half; the probe trains on the first halves
/// and is scored on the second halves.
pub fn domain_probe_accuracy(a: &Array2<f64>, b: &Array2<f64>, seed: u64) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::arg("features", "populations differ in dimension"));
    }
    let m = a.nrows().min(b.nrows());
    if m < 4 {
        return Err(Error::arg("features", "need at least 4 rows per population"));
    }
    let pick = |x: &Array2<f64>, label: &str| {
        let mut idx: Vec<usize> = (0..x.nrows()).collect();
        idx.shuffle(&mut rng_from(derive_seed(seed, label)));
        idx.truncate(m);
        idx
    };
    let (ia, ib) = (pick(a, "probe/a"), pick(b, "probe/b"));
    let half = m / 2;
    let gather = |ra: &[usize], rb: &[usize]| {
        let rows: Vec<ArrayView1<f64>> = ra
            .iter()
            .map(|&i| a.row(i))
            .chain(rb.iter().map(|&i| b.row(i)))
            .collect();
        let x = ndarray::stack(Axis(0), &rows).expect("same width");
        let y: Vec<bool> = std::iter::repeat_n(false, ra.len())
            .chain(std::iter::repeat_n(true, rb.len()))
            .collect();
        (x, y)
    };
    let (xtr, ytr) = gather(&ia[..half], &ib[..half]);
    let (xte, yte) = gather(&ia[half..], &ib[half..]);
    Ok(LogisticProbe::fit(&xtr, &ytr)?.accuracy(&xte, &yte))
}
