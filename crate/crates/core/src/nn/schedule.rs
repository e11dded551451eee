use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the training procedure. Defaults are SGD with
/// momentum 0.9, weight decay 5e-5, batch 64, and cosine annealing with
/// warm restarts (t0 = 1, t_mult = 2, lr in [5e-3, 1e-2]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub min_lr: f64,
    pub max_lr: f64,
    pub t0: usize,
    pub t_mult: usize,
    /// Shuffling seed.
    pub seed: u64,
    pub warm_restarts: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 62,
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 5e-5,
            min_lr: 5e-3,
            max_lr: 0.01,
            t0: 1,
            t_mult: 2,
            seed: 0,
            warm_restarts: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(format!("training config: {m}")));
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail("weight_decay must be nonnegative");
        }
        if !(self.min_lr > 0.0 && self.max_lr >= self.min_lr && self.max_lr.is_finite()) {
            return fail("need 0 < min_lr <= max_lr");
        }
        if self.t0 == 0 || self.t_mult == 0 {
            return fail("t0 and t_mult must be positive");
        }
        Ok(())
    }

    /// Learning rate for `epoch` (the schedule steps once per epoch).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let (t_cur, t_i) = if self.warm_restarts {
            cycle_position(self.t0, self.t_mult, epoch)
        } else {
            (epoch, self.epochs.max(1))
        };
        let frac = t_cur as f64 / t_i as f64;
        self.min_lr + 0.5 * (self.max_lr - self.min_lr) * (1.0 + (PI * frac).cos())
    }

    /// Epochs at which a new cycle begins, up to `self.epochs`.
    pub fn restart_epochs(&self) -> Vec<usize> {
        (0..self.epochs)
            .filter(|&e| {
                if self.warm_restarts {
                    cycle_position(self.t0, self.t_mult, e).0 == 0
                } else {
                    e == 0
                }
            })
            .collect()
    }
}

pub fn lr_at(config: &TrainingConfig, epoch: usize) -> f64 {
    config.lr_at(epoch)
}

/// `(epochs into the current cycle, current cycle length)`.
fn cycle_position(t0: usize, t_mult: usize, epoch: usize) -> (usize, usize) {
    let mut t_cur = epoch;
    let mut t_i = t0;
    while t_cur >= t_i {
        t_cur -= t_i;
        t_i *= t_mult;
    }
    (t_cur, t_i)
}
