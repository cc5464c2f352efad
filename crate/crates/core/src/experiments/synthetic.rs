// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{instance_seed, ExperimentError};
use crate::icnet::{GraphInput, ModelConfig, Sample};
use crate::netlist::Circuit;
use crate::obfuscate::{random_obfuscate, ObfuscationKind};

/// Locked instances of `base` whose log-scale target is
/// `slope · Σmask + N(0, noise_sd²)`. No attack is run.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_samples(
    base: Arc<Circuit>,
    count: usize,
    kind: ObfuscationKind,
    location_range: (usize, usize),
    slope: f64,
    noise_sd: f64,
    seed: u64,
    config: &ModelConfig,
) -> Result<Vec<Sample>, ExperimentError> {
    let (lo, hi) = location_range;
    if lo == 0 || lo > hi {
        return Err(ExperimentError::Invalid(format!("location range {lo}:{hi}")));
    }
    let noise = Normal::new(0.0, noise_sd).map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let s = instance_seed(seed, id as u64);
            let n = lo + (s % (hi - lo + 1) as u64) as usize;
            let inst = random_obfuscate(base.clone(), n, kind, s)?;
            let target = slope * inst.mask_popcount() as f64 + noise.sample(&mut rng);
            Ok(Sample {
                id,
                input: GraphInput::from_instance(&inst, config)?,
                target,
                censored: false,
            })
        })
        .collect()
}
