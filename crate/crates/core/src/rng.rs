//! Seeded noise streams.
//!
//! Every chain owns one ChaCha stream keyed by `(experiment seed, stream index)`,
//! so runs are reproducible and independent streams can be generated in
//! parallel without coordination.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha12Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NoiseStream { rng }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for NoiseStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Packs two indices into one stream id. Used to give every
/// (grid point, replicate) pair its own stream.
pub fn stream_id(outer: u64, inner: u64) -> u64 {
    (outer << 32) ^ inner
}

/// Seed of the `index`-th trajectory of an experiment (SplitMix64 finalizer
/// over the pair).
pub fn derive_seed(experiment_seed: u64, index: u64) -> u64 {
    let mut z = experiment_seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
