//! Seeded random substreams.
//!
//! Every stochastic stage draws from its own ChaCha8 stream derived from the
//! master seed and a fixed stream id, so stages can run in any order (or in
//! parallel) without changing each other's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

/// Author choice and rhyme plan (including rhyme retries).
pub const PLAN_STREAM: u64 = 0;
/// Punctuation budget.
pub const PUNCTUATION_STREAM: u64 = 15;

/// Stream for line `index` (0-based); lines use streams 1..=14.
pub fn line_stream(index: usize) -> u64 {
    1 + index as u64
}

pub fn substream(seed: u64, stream: u64) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
