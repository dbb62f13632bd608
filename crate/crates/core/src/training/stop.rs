use serde::{Deserialize, Serialize};

/// How validation-loss increases are counted towards the stop rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Stop at the `patience`-th epoch whose loss exceeds the previous one.
    #[default]
    Cumulative,
    /// Stop after `patience` increases in a row.
    Consecutive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    mode: StopMode,
    patience: usize,
    prev: Option<f64>,
    increases: usize,
    run: usize,
}

impl EarlyStopper {
    pub fn new(mode: StopMode, patience: usize) -> Self {
        EarlyStopper {
            mode,
            patience,
            prev: None,
            increases: 0,
            run: 0,
        }
    }

    /// Record one epoch's validation loss; true means stop now.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        match self.prev {
            Some(p) if val_loss > p => {
                self.increases += 1;
                self.run += 1;
            }
            _ => self.run = 0,
        }
        self.prev = Some(val_loss);
        let count = match self.mode {
            StopMode::Cumulative => self.increases,
            StopMode::Consecutive => self.run,
        };
        count >= self.patience
    }

    pub fn increases(&self) -> usize {
        self.increases
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop_epoch(mode: StopMode, losses: &[f64]) -> Option<usize> {
        let mut s = EarlyStopper::new(mode, 3);
        losses.iter().position(|&l| s.observe(l)).map(|i| i + 1)
    }

    #[test]
    fn traces() {
        let losses = [1.0, 0.9, 1.1, 1.0, 1.2, 1.3];
        assert_eq!(stop_epoch(StopMode::Cumulative, &losses), Some(6));
        assert_eq!(stop_epoch(StopMode::Consecutive, &losses), None);
        assert_eq!(stop_epoch(StopMode::Consecutive, &[1.0, 1.1, 1.2, 1.3, 0.1]), Some(4));
        // equal losses are not increases
        assert_eq!(stop_epoch(StopMode::Cumulative, &[1.0; 10]), None);
    }
}
