//! Seeded randomness. Every stochastic routine takes an explicit seed and
//! derives its generator here, so runs are reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Generator for a given seed.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream `stream` of `seed` (repeat i of a run uses `seed + i`;
/// sub-components of one repeat use distinct streams).
pub fn child(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[inline]
pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Fisher-Yates shuffle in place.
pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}
