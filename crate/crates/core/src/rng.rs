//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes an explicit generator. Independent
//! sub-computations (one rollout each) get their own stream derived from a
//! key drawn from the caller's generator, so results do not depend on the
//! order in which those sub-computations execute.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Generator for `(seed, stream)`. Distinct streams of the same seed are
/// independent.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fresh key from `parent`; `StreamSplitter::stream(i)` then yields
/// the i-th child stream for that key.
#[derive(Debug, Clone, Copy)]
pub struct StreamSplitter {
    key: u64,
}

impl StreamSplitter {
    pub fn new<R: RngCore + ?Sized>(parent: &mut R) -> Self {
        Self {
            key: parent.next_u64(),
        }
    }

    pub fn from_key(key: u64) -> Self {
        Self { key }
    }

    pub fn stream(&self, index: u64) -> StreamRng {
        stream_rng(self.key, index)
    }
}
