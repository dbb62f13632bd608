//! Exact count ratios and their two-decimal percentage rendering.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A count ratio kept as integers so derived rates are exact until display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    /// `None` when the denominator is zero.
    pub fn value(&self) -> Option<f64> {
        (self.den > 0).then(|| self.num as f64 / self.den as f64)
    }

    /// Percentage in hundredths of a percent, rounded half-up with integer
    /// arithmetic (e.g. 45/46 -> 9783).
    pub fn percent_hundredths(&self) -> Option<u64> {
        if self.den == 0 {
            return None;
        }
        let num = self.num as u128 * 20_000 + self.den as u128;
        Some((num / (2 * self.den as u128)) as u64)
    }

    /// Percentage rounded half-up to two decimals.
    pub fn percent_2dp(&self) -> Option<f64> {
        self.percent_hundredths().map(|h| h as f64 / 100.0)
    }

    /// Percentage text with trailing zeros trimmed, e.g. `97.83`, `94`, `60.1`.
    pub fn percent_text(&self) -> String {
        match self.percent_hundredths() {
            None => "NA".to_string(),
            Some(h) => {
                let whole = h / 100;
                let frac = h % 100;
                if frac == 0 {
                    format!("{whole}")
                } else if frac % 10 == 0 {
                    format!("{whole}.{}", frac / 10)
                } else {
                    format!("{whole}.{frac:02}")
                }
            }
        }
    }
}

/// Renders as `97.83 (45/46)`.
impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}/{})", self.percent_text(), self.num, self.den)
    }
}

/// Round half-up to two decimals for display of real-valued statistics.
pub fn round_2dp(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}
