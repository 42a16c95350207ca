//! Deterministic RNG stream derivation.
//!
//! Every stochastic task in the engine owns a private stream derived from
//! the run seed plus a label identifying the task (variable id, vintage
//! date, bootstrap replication index, ...). Streams therefore depend only
//! on task identity, never on scheduling order or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a, fixed here so hashes are stable across platforms and Rust versions.
fn fnv1a(init: u64, bytes: &[u8]) -> u64 {
    let mut h = init;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a ChaCha stream from `seed` and a list of task labels.
pub fn derive_rng(seed: u64, labels: &[&str]) -> ChaCha12Rng {
    let mut h = fnv1a(0xCBF2_9CE4_8422_2325, &seed.to_le_bytes());
    for label in labels {
        h = fnv1a(h, label.as_bytes());
        h = fnv1a(h, &[0xFF]); // separator so ["ab"] != ["a","b"]
    }
    let mut state = h;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
