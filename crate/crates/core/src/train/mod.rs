//! Training protocol: splits, the stepped schedule, augmentation, Adam,
//! the epoch loop and evaluation.

mod adam;
mod augment;
mod eval;
mod trainer;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamHyper, AdamState};
pub use augment::{augment, Affine, AugmentConfig};
pub use eval::{evaluate, evaluate_predictions, EvalReport};
pub use trainer::{deterministic_mode, train, train_step, write_metrics_csv, MetricsRecord, TrainOutcome, DETERMINISTIC_ENV};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    /// `(epoch, factor)`: from `epoch` on, the rate is `initial_lr * factor`.
    pub milestones: Vec<(usize, f64)>,
    pub adam: AdamHyper,
    pub augment: AugmentConfig,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            initial_lr: 1e-3,
            milestones: vec![(81, 1e-1), (121, 1e-2), (161, 1e-3), (181, 0.5e-3)],
            adam: AdamHyper::default(),
            augment: AugmentConfig::default(),
            split: [0.7, 0.1, 0.2],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.initial_lr)));
        }
        check_ratios(self.split)
    }
}

fn check_ratios(r: [f64; 3]) -> Result<()> {
    if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split ratios {r:?} must be in [0, 1] and sum to 1")));
    }
    Ok(())
}

/// Rate for a 0-based epoch. Milestone factors scale the initial rate;
/// they do not compound.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside a {}-epoch schedule",
            config.epochs
        )));
    }
    let factor = config
        .milestones
        .iter()
        .filter(|(at, _)| *at <= epoch)
        .max_by_key(|(at, _)| *at)
        .map_or(1.0, |(_, f)| *f);
    Ok(config.initial_lr * factor)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then `floor(r0 * n)` train, `floor(r1 * n)` validation
/// and the remainder for test.
pub fn split_dataset(n: usize, ratios: [f64; 3], seed: u64) -> Result<Split> {
    if n == 0 {
        return Err(Error::EmptyDataset("cannot split zero samples".into()));
    }
    check_ratios(ratios)?;
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(seed).derive(0x5350_4c49_54).shuffle(&mut idx);
    // the epsilon keeps exact products such as 0.7 * 10 from flooring to 6
    let n_train = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
    let n_val = ((ratios[1] * n as f64) + 1e-9).floor() as usize;
    let test = idx.split_off((n_train + n_val).min(n));
    let val = idx.split_off(n_train.min(idx.len()));
    Ok(Split { train: idx, val, test })
}
