// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))
    #[default]
    UniformGlorot,
    /// N(0, 2/(fan_in+fan_out))
    Gaussian,
}

/// Draws every parameter of `layout` (name, rows, cols) with a single seeded
/// stream, in layout order. `rows` is taken as fan-in and `cols` as fan-out.
pub fn init_params(layout: &[(&str, usize, usize)], scheme: InitScheme, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for &(name, rows, cols) in layout {
        let fan_sum = (rows + cols).max(1) as f64;
        let mut m = Matrix::zeros(rows, cols);
        match scheme {
            InitScheme::UniformGlorot => {
                let limit = (6.0 / fan_sum).sqrt();
                for v in m.as_mut_slice() {
                    *v = rng.random_range(-limit..limit);
                }
            }
            InitScheme::Gaussian => {
                let normal = Normal::new(0.0, (2.0 / fan_sum).sqrt()).expect("positive std");
                for v in m.as_mut_slice() {
                    *v = normal.sample(&mut rng);
                }
            }
        }
        store.insert(name, m);
    }
    store
}
