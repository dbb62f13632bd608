/// One step of the per-epoch decay `α_{n+1} = α_n · (1 + γ n)^(−λ)`.
pub fn lr_schedule(alpha_n: f64, n: u64, gamma: f64, lambda: f64) -> f64 {
    alpha_n * (1.0 + gamma * n as f64).powf(-lambda)
}

/// Learning rate in effect during epoch `epoch` (0-based) when training
/// starts at `alpha0` and the decay is applied after every epoch.
pub fn lr_for_epoch(alpha0: f64, epoch: u64, gamma: f64, lambda: f64) -> f64 {
    (0..epoch).fold(alpha0, |a, n| lr_schedule(a, n, gamma, lambda))
}
