use crate::error::{bail, Result};

/// Reduce-on-plateau parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            factor: 0.1,
            patience: 5,
            min_delta: 1e-4,
        }
    }
}

/// Learning-rate schedule driven by the validation loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Plateau {
    pub config: PlateauConfig,
    pub lr: f64,
    pub floor: f64,
    best: f64,
    stale: usize,
}

impl Plateau {
    pub fn new(lr: f64, floor: f64, config: PlateauConfig) -> Result<Self> {
        if !(lr >= floor && floor > 0.0) || !(config.factor > 0.0 && config.factor < 1.0) || config.min_delta < 0.0 {
            bail!(
                InvalidArgument,
                "Plateau",
                "need lr {} ≥ floor {} > 0, factor {} in (0, 1) and min_delta {} ≥ 0",
                lr,
                floor,
                config.factor,
                config.min_delta
            );
        }
        Ok(Self {
            config,
            lr,
            floor,
            best: f64::INFINITY,
            stale: 0,
        })
    }

    /// Records one validation loss and returns the learning rate to use next.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best - self.config.min_delta {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.config.patience {
                self.lr = (self.lr * self.config.factor).max(self.floor);
                self.stale = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plateau() -> Plateau {
        Plateau::new(1e-2, 1e-7, PlateauConfig::default()).unwrap()
    }

    #[test]
    fn improving_keeps_rate() {
        let mut p = plateau();
        for k in 0..30 {
            assert_eq!(p.step(10.0 - k as f64), 1e-2);
        }
    }

    #[test]
    fn flat_epochs_decay_once_per_patience() {
        let mut p = plateau();
        p.step(1.0);
        for _ in 0..4 {
            assert_eq!(p.step(1.0), 1e-2);
        }
        assert!((p.step(1.0) - 1e-3).abs() < 1e-15);
        // Improvement below min_delta does not count.
        for _ in 0..4 {
            p.step(1.0 - 5e-5);
        }
        assert!((p.step(1.0) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn decay_is_floored() {
        let mut p = plateau();
        for _ in 0..200 {
            p.step(1.0);
        }
        assert_eq!(p.lr, 1e-7);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(Plateau::new(1e-8, 1e-7, PlateauConfig::default()).is_err());
        let bad = PlateauConfig {
            factor: 1.0,
            ..PlateauConfig::default()
        };
        assert!(Plateau::new(1e-2, 1e-7, bad).is_err());
    }
}
