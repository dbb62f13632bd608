//! Binary losses on raw logits.

use ndarray::Array1;

fn log_sigmoid(z: f64) -> f64 {
    // log σ(z) = -softplus(-z)
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log p_t` and `p_t` for label `y`.
fn log_pt(logit: f64, y: bool) -> (f64, f64) {
    let signed = if y { logit } else { -logit };
    (log_sigmoid(signed), sigmoid(signed))
}

/// Focal loss `-(1 - p_t)^γ · log(p_t)` with `p = σ(logit)` and
/// `p_t = p` for positives, `1 - p` for negatives.
pub fn focal_loss(logit: f64, y: bool, gamma: f64) -> f64 {
    let (lp, pt) = log_pt(logit, y);
    let w = if gamma == 0.0 { 1.0 } else { (1.0 - pt).powf(gamma) };
    -w * lp
}

/// Derivative of [`focal_loss`] with respect to the logit.
pub fn focal_loss_grad(logit: f64, y: bool, gamma: f64) -> f64 {
    let sign = if y { 1.0 } else { -1.0 };
    let (lp, pt) = log_pt(logit, y);
    let q = 1.0 - pt;
    // d/dz = s · [γ p_t (1-p_t)^γ log p_t − (1-p_t)^(γ+1)]
    let qg = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
    sign * (gamma * pt * qg * lp - qg * q)
}

/// Binary cross-entropy on a logit, `-log σ(z)` for positives and
/// `-log(1 - σ(z))` for negatives.
pub fn bce_with_logits(logit: f64, y: bool) -> f64 {
    focal_loss(logit, y, 0.0)
}

pub fn bce_with_logits_grad(logit: f64, y: bool) -> f64 {
    sigmoid(logit) - if y { 1.0 } else { 0.0 }
}

/// Batch mean of a per-sample loss and its gradient w.r.t. each logit.
pub fn mean_loss(
    logits: &Array1<f32>,
    labels: &[bool],
    loss: impl Fn(f64, bool) -> f64,
    grad: impl Fn(f64, bool) -> f64,
) -> (f64, Array1<f32>) {
    assert_eq!(logits.len(), labels.len());
    let n = logits.len() as f64;
    let mut total = 0.0;
    let g = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            total += loss(z as f64, y);
            (grad(z as f64, y) / n) as f32
        })
        .collect();
    (total / n, g)
}

pub fn focal_batch(logits: &Array1<f32>, labels: &[bool], gamma: f64) -> (f64, Array1<f32>) {
    mean_loss(
        logits,
        labels,
        |z, y| focal_loss(z, y, gamma),
        |z, y| focal_loss_grad(z, y, gamma),
    )
}

pub fn bce_batch(logits: &Array1<f32>, labels: &[bool]) -> (f64, Array1<f32>) {
    mean_loss(logits, labels, bce_with_logits, bce_with_logits_grad)
}
