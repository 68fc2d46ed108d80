//! Deterministic fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlval_core::active::Candidate;
use rlval_core::dqn::Transition;
use rlval_core::env::WindowId;

pub const WINDOW: usize = 25;
pub const HIDDEN: usize = 32;
pub const BATCH: usize = 32;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn window_values(rng: &mut impl Rng) -> Vec<f64> {
    (0..WINDOW).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn sequence(rng: &mut impl Rng, input: usize) -> Vec<Vec<f64>> {
    (0..WINDOW)
        .map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn transitions(rng: &mut impl Rng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|i| Transition {
            state: window_values(rng),
            action: rlval_core::env::Action::from_index(i % 2),
            reward: rng.random_range(-1.0..2.0),
            next: (i % 5 != 0).then(|| window_values(rng)),
        })
        .collect()
}

pub fn candidates(rng: &mut impl Rng, n: usize) -> Vec<Candidate> {
    (0..n)
        .map(|i| Candidate {
            window: WindowId {
                series: i / 1000,
                start: i % 1000,
            },
            q: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        })
        .collect()
}
