//! Counter-based random streams.
//!
//! A replicate stream is a ChaCha8 keystream keyed by the master seed and
//! selected by the stream number, so draw `i` of replicate `r` is a pure
//! function of `(master, r, i)` regardless of scheduling. Standard normals are
//! produced by inverse-CDF transformation of open-interval uniforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    /// Replicate index.
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64) -> Self {
        RngSeed { master, stream: 0 }
    }

    /// Seed of replicate `index`. Distinct indices give distinct streams.
    pub fn replicate(self, index: u64) -> Self {
        RngSeed {
            master: self.master,
            stream: index,
        }
    }
}

fn key_from_master(master: u64) -> [u8; 32] {
    // splitmix64 expansion of the master seed into a 256-bit key
    let mut state = master;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    key
}

/// Sequential reader over one replicate stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    standard: Normal,
}

impl NormalStream {
    pub fn new(seed: RngSeed) -> Self {
        Self::at(seed, 0)
    }

    /// Stream positioned at draw `draw_index`.
    pub fn at(seed: RngSeed, draw_index: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key_from_master(seed.master));
        rng.set_stream(seed.stream);
        // one u64 per draw = two 32-bit keystream words
        rng.set_word_pos(2 * draw_index as u128);
        NormalStream {
            rng,
            standard: Normal::standard(),
        }
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        self.standard.inverse_cdf(u)
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.next_normal();
        }
    }
}
