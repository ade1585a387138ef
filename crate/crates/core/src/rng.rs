//! Counter-based random streams.
//!
//! Every stream is addressed by a key tuple instead of being advanced from a
//! global generator, so any (replica, step, sweep) block can be regenerated
//! in isolation and results do not depend on worker scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved for one sweep inside a (replica, step) stream.
const SWEEP_STRIDE: u128 = 1 << 40;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a key tuple into a 64-bit stream id.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Random stream for one (seed, domain, a, b) key.
///
/// `domain` separates unrelated consumers that share a seed.
pub fn stream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, part) in key.chunks_exact_mut(8).zip([seed, domain, a, mix(&[seed, domain, a])]) {
        chunk.copy_from_slice(&part.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(b);
    rng
}

/// Stream for a Monte Carlo sweep: keyed by (seed, replica, field step, sweep).
pub fn sweep_stream(seed: u64, replica: u64, step: u64, sweep: u64) -> ChaCha8Rng {
    let mut rng = stream(seed, domain::SWEEP, replica, step);
    rng.set_word_pos(SWEEP_STRIDE * sweep as u128);
    rng
}

/// Domain tags for [`stream`].
pub mod domain {
    pub const SWEEP: u64 = 1;
    pub const MEASURE: u64 = 2;
    pub const SHOT: u64 = 3;
    pub const GRAPH: u64 = 4;
    pub const DISORDER: u64 = 5;
    pub const BIAS: u64 = 6;
    pub const CALIBRATION: u64 = 7;
    pub const INIT: u64 = 8;
}
