// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_grads, GraphInput, IcnetError, Model, ModelConfig};
use crate::numerics::{AdamConfig, AdamState, NumericsError};

/// A training example. `target` is the log-scale label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub input: GraphInput,
    pub target: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochLog>,
    /// Positions into the sample slice passed to [`train`].
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub converged: bool,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse,wall_seconds\n");
        for e in &self.log {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.wall_seconds);
        }
        out
    }

    pub fn final_val_mse(&self) -> Option<f64> {
        self.log.last().map(|e| e.val_mse)
    }
}

/// Seeded disjoint split of `0..n`; both halves are returned sorted and
/// each is non-empty when `n ≥ 2`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut n_train = (n as f64 * train_fraction).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    } else {
        n_train = n;
    }
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Log-scale mean squared error of `model` on `samples`.
pub fn evaluate_mse(model: &Model, samples: &[&Sample]) -> Result<f64, IcnetError> {
    if samples.is_empty() {
        return Err(IcnetError::EmptyDataset);
    }
    let mut total = 0.0;
    for s in samples {
        let p = model.forward(&s.input)?;
        let r = p.log_value(model.config.output_head) - s.target;
        total += r * r;
    }
    Ok(total / samples.len() as f64)
}

/// Train/test positions into `samples` as [`train`] draws them: censored
/// samples are dropped unless the config includes them, then the rest is
/// split with [`split_indices`].
pub fn partition(samples: &[Sample], config: &ModelConfig) -> Result<(Vec<usize>, Vec<usize>), IcnetError> {
    if samples.is_empty() {
        return Err(IcnetError::EmptyDataset);
    }
    let usable: Vec<usize> = (0..samples.len())
        .filter(|&i| config.include_censored || !samples[i].censored)
        .collect();
    if usable.is_empty() {
        return Err(IcnetError::AllCensored);
    }
    if usable.len() < 2 {
        return Err(IcnetError::TooFewSamples {
            needed: 2,
            got: usable.len(),
        });
    }
    let (tr, te) = split_indices(usable.len(), config.train_fraction, config.seed);
    Ok((tr.iter().map(|&i| usable[i]).collect(), te.iter().map(|&i| usable[i]).collect()))
}

/// Seeded split, per-epoch shuffled minibatches, ADAM descent on the mean
/// squared residual. Stops after `max_epochs` or once the epoch training
/// loss changes by less than `convergence_tol` (relative) over
/// `convergence_window` epochs.
pub fn train(samples: &[Sample], config: &ModelConfig) -> Result<TrainOutcome, IcnetError> {
    config.validate()?;
    let (train_idx, test_idx) = partition(samples, config)?;
    let test: Vec<&Sample> = test_idx.iter().map(|&i| &samples[i]).collect();

    let mut model = Model::new(config.clone())?;
    let mut adam = AdamState::new(
        &model.params,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let start = Instant::now();
    let mut log: Vec<EpochLog> = Vec::new();
    let mut converged = false;
    let mut order = train_idx.clone();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let bl = loss_and_grads(&model, &batch)?;
            total += bl.mse * chunk.len() as f64;
            match adam.step(&mut model.params, &bl.grads) {
                Ok(()) => {}
                Err(NumericsError::NonFiniteGradient(name)) => {
                    log::warn!("epoch {epoch}: skipped step, non-finite gradient in {name}");
                }
                Err(e) => return Err(e.into()),
            }
        }
        let train_mse = total / order.len() as f64;
        let val_mse = evaluate_mse(&model, &test)?;
        log.push(EpochLog {
            epoch,
            train_mse,
            val_mse,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if log.len() > config.convergence_window {
            let prev = log[log.len() - 1 - config.convergence_window].train_mse;
            let rel = (train_mse - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.convergence_tol {
                converged = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        log,
        train_idx,
        test_idx,
        converged,
    })
}
