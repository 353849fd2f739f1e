//! Seed derivation and the sampling primitives shared by the trainers.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit value.
//! Child seeds are derived from a parent seed, a stream tag and an index through
//! splitmix64 finalization, so sibling streams never depend on each other's draws.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags used with [`derive_seed`].
pub mod stream {
    pub const CASCADE: u64 = 1;
    pub const LEVEL: u64 = 2;
    pub const HEAD: u64 = 3;
    pub const IMPORTANCE: u64 = 4;
}

pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(parent) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

/// `ceil(fraction * n)`, at least 1 and at most `n`.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// Draws `amount` distinct indices from `0..n` and returns them sorted ascending.
pub fn sample_sorted(rng: &mut Rng, n: usize, amount: usize) -> Vec<usize> {
    let mut picked = index::sample(rng, n, amount.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

/// Draws a sorted subset of `pool` of size `ceil(fraction * |pool|)`.
pub fn sample_from_pool(rng: &mut Rng, pool: &[usize], fraction: f64) -> Vec<usize> {
    if pool.is_empty() {
        return Vec::new();
    }
    let k = fraction_count(fraction, pool.len());
    let mut chosen: Vec<usize> = sample_sorted(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();
    chosen
}
