//! Deterministic random number generation.
//!
//! Every stochastic operation takes a [`SeededRng`]. The generator is ChaCha8
//! seeded through `SeedableRng::seed_from_u64`, whose output stream is fixed
//! by the `rand_chacha` crate and identical on every platform.
//!
//! Batch operations derive one independent stream per item with
//! [`SeededRng::derive`], which mixes the parent seed and the item index
//! through SplitMix64.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed of the child stream `index`, independent of how much this
    /// generator has already been consumed.
    pub fn derived_seed(&self, index: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
    }

    pub fn derive(&self, index: u64) -> SeededRng {
        SeededRng::new(self.derived_seed(index))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
