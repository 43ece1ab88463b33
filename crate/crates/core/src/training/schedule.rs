use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic decay from `α₀` at epoch 0 to `α₁` at epoch `N`:
/// `αᵢ = (1 − (i/N)²)·α₀ + (i/N)²·α₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub alpha0: f64,
    pub alpha1: f64,
    pub n_epochs: usize,
}

impl LrSchedule {
    /// `α₁ = 0.7·α₀`.
    pub fn new(alpha0: f64, n_epochs: usize) -> Self {
        Self { alpha0, alpha1: 0.7 * alpha0, n_epochs }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) || !(self.alpha1 >= 0.0 && self.alpha1.is_finite()) {
            return Err(Error::config("learning rates must be positive and finite"));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.n_epochs == 0 {
            return self.alpha0;
        }
        if epoch >= self.n_epochs {
            return self.alpha1;
        }
        let r = epoch as f64 / self.n_epochs as f64;
        let r2 = r * r;
        (1.0 - r2) * self.alpha0 + r2 * self.alpha1
    }
}

/// Free-function form of [`LrSchedule::lr_at`].
pub fn lr_at(schedule: &LrSchedule, epoch: usize) -> f64 {
    schedule.lr_at(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = LrSchedule::new(1e-4, 1000);
        assert_eq!(s.lr_at(0), 1e-4);
        assert_eq!(s.lr_at(1000), 0.7e-4);
        assert!((s.lr_at(500) - 0.925e-4).abs() < 1e-18);
    }

    #[test]
    fn nonincreasing() {
        let s = LrSchedule::new(1e-3, 777);
        for i in 0..777 {
            assert!(s.lr_at(i + 1) <= s.lr_at(i));
        }
    }
}
