//! Splittable, counter-keyed random streams.
//!
//! A stream is identified by a 64-bit key derived from a root seed and a path
//! of indices (scenario, replicate, bootstrap index, ...). Every leaf builds
//! its own ChaCha8 generator from the key alone, so the numbers consumed by
//! one replicate never depend on how many other replicates ran before it or
//! on which thread it ran.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    key: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            key: splitmix64(seed ^ 0x6475_7261_7469_6f6e),
        }
    }

    /// Derive the `index`-th child stream.
    pub fn child(self, index: u64) -> Self {
        RngStream {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F))),
        }
    }

    pub fn key(self) -> u64 {
        self.key
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut state = self.key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
