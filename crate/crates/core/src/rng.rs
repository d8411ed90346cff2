//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit generator. Independent streams
//! are derived from a master seed and a key path, so results do not depend on
//! the order in which workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of the generator and key-derivation scheme. Bump on any change
/// that alters the produced streams.
pub const RNG_SCHEME: &str = "chacha8-splitmix64-v1";

pub type StreamRng = ChaCha8Rng;

pub mod tag {
    pub const VIGU_SAMPLES: u64 = 1;
    pub const UCB_EPISODES: u64 = 2;
    pub const MC_ROLLOUTS: u64 = 3;
    pub const ENV_GEN: u64 = 4;
    pub const UCB_MC: u64 = 5;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A master seed from which keyed child streams are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Child tree addressed by `key`.
    pub fn child(&self, key: u64) -> SeedTree {
        let mut st = self.master ^ key.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        SeedTree {
            master: splitmix64(&mut st),
        }
    }

    /// Generator for the stream addressed by `keys`.
    pub fn stream(&self, keys: &[u64]) -> StreamRng {
        let tree = keys.iter().fold(*self, |t, &k| t.child(k));
        let mut st = tree.master;
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut st).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
