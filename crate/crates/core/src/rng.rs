//! Counter-based derivation of independent RNG streams from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-stream RNG.
pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A stream keyed by `seed` and a path of counters, e.g. `(replicate, field)`.
/// Distinct paths give unrelated streams; the same path always gives the same one.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut h = splitmix(seed);
    for &k in path {
        h = splitmix(h ^ splitmix(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    let mut key = [0u8; 32];
    let mut s = h;
    for chunk in key.chunks_mut(8) {
        s = splitmix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// A 64-bit seed derived from `seed` and `path`, for handing to APIs that take a plain seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    use rand::RngCore;
    stream(seed, path).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        let e: u64 = stream(7, &[1]).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }
}
