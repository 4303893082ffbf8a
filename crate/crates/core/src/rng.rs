// SPDX-License-Identifier: MIT OR Apache-2.0

//! Keyed, platform-independent random streams.
//!
//! Every draw in the crate comes from a ChaCha8 generator addressed by a
//! `(seed, stream_id)` pair. Nested keys (realisation, permutation, covariate)
//! are folded into the stream id with a SplitMix64 finaliser, so results never
//! depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derives an independent sub-stream keyed by `key`.
    pub fn substream(&self, key: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(key.wrapping_add(1))),
        }
    }

    pub fn keyed(&self, keys: &[u64]) -> Self {
        keys.iter().fold(*self, |acc, k| acc.substream(*k))
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
