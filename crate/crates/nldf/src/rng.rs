//! Deterministic random streams for sweeps.
//!
//! Every sampled quantity draws from a stream keyed by `(seed, label, index)`,
//! so adding or reordering checks never perturbs the draws of another check
//! and per-sample work can run in parallel without shared RNG state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a hash of a label string; stable across runs and platforms.
fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// splitmix64 finalizer; decorrelates nearby keys.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator for sample `index` of the stream named `label` under `seed`.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let key = mix(seed ^ mix(fnv1a(label)) ^ mix(index.wrapping_mul(0xa076_1d64_78bd_642f)));
    ChaCha8Rng::seed_from_u64(key)
}
