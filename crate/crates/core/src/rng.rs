//! Seed-derived random substreams.
//!
//! Every independent unit of simulation work (a sweep cell, a replication
//! inside it, an oracle batch) draws from its own ChaCha8 stream. The stream
//! key is derived from the run seed and the unit's index path:
//!
//! ```text
//! state = splitmix64(seed)
//! for idx in path: state = splitmix64(state ^ splitmix64(idx + 1))
//! key   = [splitmix64(state + k * GOLDEN) for k in 1..=4]  (little-endian)
//! ```
//!
//! The derivation only depends on `(seed, path)`, so serial and parallel runs
//! visit identical numbers no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the generator for the unit identified by `path` under `seed`.
pub fn substream(seed: u64, path: &[u64]) -> SimRng {
    let mut state = splitmix64(seed);
    for &idx in path {
        state = splitmix64(state ^ splitmix64(idx.wrapping_add(1)));
    }
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(state.wrapping_add((k as u64 + 1).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_stream() {
        let a: Vec<u64> = (0..8).map({
            let mut r = substream(42, &[3, 1]);
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = substream(42, &[3, 1]);
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_paths_differ() {
        let first = |seed, path: &[u64]| -> u64 { substream(seed, path).random() };
        assert_ne!(first(42, &[0, 1]), first(42, &[1, 0]));
        assert_ne!(first(42, &[0]), first(42, &[0, 0]));
        assert_ne!(first(42, &[]), first(43, &[]));
    }
}
