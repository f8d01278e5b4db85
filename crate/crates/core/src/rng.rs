//! Counter-based random streams.
//!
//! Every path is driven by its own ChaCha8 stream: the key is derived from
//! `(master_seed, stream_id)` and the 64-bit ChaCha stream number is the path
//! index. Path `k` therefore gets the same numbers no matter which worker
//! produces it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Derive an independent family, e.g. for a second noise source that
    /// must not share numbers with the first.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id: splitmix64(
                self.stream_id ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)),
            ),
        }
    }

    /// The generator for path `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [
            self.master_seed,
            self.stream_id,
            splitmix64(self.master_seed),
            splitmix64(self.stream_id ^ 0x9e37_79b9_7f4a_7c15),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self::new(20_240_601, 0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
