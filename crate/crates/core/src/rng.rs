//! Hierarchical seeding. Every random decision in the toolkit draws from a
//! ChaCha stream selected by `(seed, purpose, index)`, so results never
//! depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Each gets a disjoint 16-bit range of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Split = 1,
    Stimulus = 2,
    Evolve = 3,
    RandomSearch = 4,
}

/// Returns the RNG for `(seed, purpose, a, b)`.
pub fn stream(seed: u64, purpose: Purpose, a: u32, b: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((purpose as u64) << 48) ^ ((a as u64) << 24) ^ (b as u64);
    rng.set_stream(id);
    rng
}

/// A child seed for a nested seeded procedure, e.g. a second split.
pub fn sub_seed(seed: u64, purpose: Purpose, index: u32) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, 0x00ff_ffff, index).next_u64()
}
