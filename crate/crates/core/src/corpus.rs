//! Reproducible random trigonometric potentials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::potential::Potential;

pub const DEFAULT_SEED: u64 = 20_240_611;
pub const DEFAULT_SIZE: usize = 10;
pub const MAX_MODES: usize = 4;
pub const COEFF_BOUND: f64 = 2.0;

/// `count` potentials with `1..=MAX_MODES` modes and coefficients uniform in
/// `[-COEFF_BOUND, COEFF_BOUND]`.
pub fn random_corpus(seed: u64, count: usize) -> Vec<Potential> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(1..=MAX_MODES);
            let mut draw = || -> Vec<f64> {
                (0..m).map(|_| rng.random_range(-COEFF_BOUND..=COEFF_BOUND)).collect()
            };
            let cos = draw();
            let sin = draw();
            Potential::new(cos, sin).expect("finite coefficients")
        })
        .collect()
}

pub fn default_corpus() -> Vec<Potential> {
    random_corpus(DEFAULT_SEED, DEFAULT_SIZE)
}
