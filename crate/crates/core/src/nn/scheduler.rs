use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 10,
        }
    }
}

/// Reduce-on-plateau: after `patience` consecutive epochs without a new best
/// validation loss, the learning rate is multiplied by `factor`.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    lr: f64,
    config: PlateauConfig,
    best: f64,
    bad_epochs: usize,
    reductions: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, config: PlateauConfig) -> Self {
        assert!(
            config.factor > 0.0 && config.factor < 1.0,
            "plateau factor must lie in (0, 1)"
        );
        PlateauScheduler {
            lr,
            config,
            best: f64::INFINITY,
            bad_epochs: 0,
            reductions: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn reductions(&self) -> usize {
        self.reductions
    }

    /// Records one epoch's validation loss and returns the learning rate to
    /// use next.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.config.patience {
                self.lr *= self.config.factor;
                self.bad_epochs = 0;
                self.reductions += 1;
            }
        }
        self.lr
    }
}
