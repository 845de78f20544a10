//! Seeded random sources.
//!
//! Every stochastic routine takes either a caller-owned `Rng` or a `u64` seed.
//! Parallel work is split into fixed-size partitions, each with its own ChaCha
//! stream, so results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for `(seed, stream)`. Distinct streams never overlap.
pub fn seeded(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix a seed with a label so independent stages of one run get unrelated seeds.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded with a splitmix step.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
