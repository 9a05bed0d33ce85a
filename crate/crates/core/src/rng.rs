//! Named, seedable random streams.
//!
//! Every source of randomness in a run (environment noise, reward noise,
//! planner sampling, ...) draws from its own ChaCha stream so that changing
//! how much one consumer draws never shifts another consumer's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stream {
    EnvNoise,
    RewardNoise,
    Planner,
    VStar,
    Evaluation,
    Custom(u64),
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::EnvNoise => 1,
            Stream::RewardNoise => 2,
            Stream::Planner => 3,
            Stream::VStar => 4,
            Stream::Evaluation => 5,
            Stream::Custom(id) => 1000 + id,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for a (seed, key) pair, independent of the order
/// in which keys are queried.
pub fn keyed(seed: u64, key: &[u64]) -> StreamRng {
    let mut h = mix64(seed);
    for &word in key {
        h = mix64(h ^ word);
    }
    ChaCha8Rng::seed_from_u64(h)
}
