//! Per-trial random streams.
//!
//! Trial `i` of a run seeded with `seed` draws from ChaCha8 keyed by
//! `seed` (expanded with the `rand_core` PCG32 seeding rule) on stream `i`.
//! ChaCha is counter based, so the variates of a trial depend only on
//! `(seed, i)` and not on which thread evaluates it or in which order.
//! Normal variates use the ziggurat sampler of `rand_distr`, which is a
//! fixed, platform-independent transform of the uniform stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// First standard normal variate of trial `trial`.
pub fn trial_normal(seed: u64, trial: u64) -> f64 {
    trial_rng(seed, trial).sample(StandardNormal)
}

/// Evaluate `f` for every trial index in parallel; the output is in trial
/// order regardless of scheduling.
pub fn map_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}
