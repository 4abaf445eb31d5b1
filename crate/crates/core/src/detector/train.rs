//! Plain mini-batch SGD on the two-term cross-entropy.
//!
//! Batch indices are sorted before the gradient is accumulated, so the
//! reduction order depends only on batch membership. With a batch covering
//! both sets the two sampling modes therefore produce bitwise identical
//! updates.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{gradient, loss, Architecture, DetectorModel, Standardizer, PROB_FLOOR};
use crate::error::{config_err, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Real and constructed sets are shuffled and batched separately.
    Independent,
    /// One shuffle over `(x_i, x'_i)` pairs; both sets must be aligned.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub mode: Mode,
    pub seed: u64,
    pub prob_floor: f64,
    /// Fit the feature standardizer on the training set; otherwise features
    /// are used as they are.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Linear,
            batch_size: 32,
            epochs: 50,
            learning_rate: 0.1,
            mode: Mode::Independent,
            seed: 7,
            prob_floor: PROB_FLOOR,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(config_err!("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err!("learning rate {} must be positive and finite", self.learning_rate));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return Err(config_err!("probability floor {} must lie in (0, 0.5)", self.prob_floor));
        }
        if let Architecture::Mlp { hidden: 0 } = self.architecture {
            return Err(config_err!("hidden layer must have at least one unit"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: DetectorModel,
    /// Full training loss before the first update.
    pub initial_loss: f64,
    /// Full training loss after each epoch.
    pub loss_trace: Vec<f64>,
    pub steps: usize,
}

/// Index batches of one epoch for a set of size `n`, cycling through a fresh
/// permutation so that every step gets `min(batch, n)` distinct indices.
fn epoch_batches(perm: &[usize], batch: usize, steps: usize) -> Vec<Vec<usize>> {
    let n = perm.len();
    let b = batch.min(n);
    (0..steps)
        .map(|s| {
            let mut idx: Vec<usize> = (0..b).map(|i| perm[(s * b + i) % n]).collect();
            idx.sort_unstable();
            idx
        })
        .collect()
}

fn gather<'a, R: AsRef<[f64]>>(rows: &'a [R], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| rows[i].as_ref()).collect()
}

/// Trains a detector from scratch. The standardizer (if enabled) is fit on
/// the union of both training sets.
pub fn train<R: AsRef<[f64]>, S: AsRef<[f64]>>(real: &[R], fake: &[S], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if real.is_empty() || fake.is_empty() {
        return Err(config_err!("training needs at least one real and one fake example"));
    }
    if config.mode == Mode::Paired && real.len() != fake.len() {
        return Err(config_err!(
            "paired mode needs aligned sets, got {} real and {} constructed",
            real.len(),
            fake.len()
        ));
    }
    let dim = real[0].as_ref().len();
    let standardizer = if config.standardize {
        let all: Vec<&[f64]> = real.iter().map(|r| r.as_ref()).chain(fake.iter().map(|r| r.as_ref())).collect();
        Standardizer::fit(&all)?
    } else {
        Standardizer::identity(dim)
    };
    let mut model = DetectorModel::init(config.architecture, standardizer, &mut rng::stream(config.seed, rng::TAG_INIT));
    model.prob_floor = config.prob_floor;
    model.validate()?;

    let initial_loss = loss(&model, real, fake)?;
    let mut shuffle = rng::stream(config.seed, rng::TAG_TRAIN);
    let mut perm_real: Vec<usize> = (0..real.len()).collect();
    let mut perm_fake: Vec<usize> = (0..fake.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut steps = 0;
    for epoch in 0..config.epochs {
        let batches: Vec<(Vec<usize>, Vec<usize>)> = match config.mode {
            Mode::Independent => {
                perm_real.shuffle(&mut shuffle);
                perm_fake.shuffle(&mut shuffle);
                let b = config.batch_size;
                let n_steps = real.len().max(fake.len()).div_ceil(b);
                epoch_batches(&perm_real, b, n_steps).into_iter().zip(epoch_batches(&perm_fake, b, n_steps)).collect()
            }
            Mode::Paired => {
                perm_real.shuffle(&mut shuffle);
                let n_steps = real.len().div_ceil(config.batch_size);
                epoch_batches(&perm_real, config.batch_size, n_steps).into_iter().map(|i| (i.clone(), i)).collect()
            }
        };
        for (ir, ifk) in &batches {
            let g = gradient(&model, &gather(real, ir), &gather(fake, ifk))?;
            for (p, gi) in model.params.iter_mut().zip(&g) {
                *p -= config.learning_rate * gi;
            }
            steps += 1;
        }
        let l = loss(&model, real, fake)?;
        if !l.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(alloc::format!("training diverged in epoch {epoch}")));
        }
        trace.push(l);
    }
    Ok(TrainOutcome { model, initial_loss, loss_trace: trace, steps })
}
