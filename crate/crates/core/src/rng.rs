//! Keyed random streams.
//!
//! Every cascade draws from its own ChaCha8 stream whose 256-bit key is derived
//! from `(master seed, trial, cascade index)`. Streams never depend on the
//! order in which workers pick up cascades, so parallel construction is
//! reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CascadeRng = ChaCha8Rng;

/// Identifies one trial of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialStream {
    pub seed: u64,
    pub trial: u64,
}

impl TrialStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    /// Stream for cascade `index` of this trial's pool.
    pub fn cascade(&self, index: u64) -> CascadeRng {
        stream_rng(self.seed, self.trial, index, DOMAIN_CASCADE)
    }

    /// Auxiliary stream, independent of every cascade stream.
    pub fn auxiliary(&self, index: u64) -> CascadeRng {
        stream_rng(self.seed, self.trial, index, DOMAIN_AUX)
    }
}

const DOMAIN_CASCADE: u64 = 0x6361_7363_6164_6531;
const DOMAIN_AUX: u64 = 0x6175_7869_6c69_6172;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, trial: u64, index: u64, domain: u64) -> CascadeRng {
    let words = [seed, trial, index, domain];
    let mut key = [0u8; 32];
    let mut acc = 0u64;
    for (i, w) in words.iter().enumerate() {
        acc = splitmix64(acc ^ splitmix64(*w ^ (i as u64).wrapping_mul(0xa076_1d64_78bd_642f)));
        key[8 * i..8 * i + 8].copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
