//! Seed derivation and rounding shared by every randomized step.
//!
//! Random streams are derived from a SHA-256 digest of the user seed and a
//! label (usually a sample id), so a sample's stream does not depend on the
//! order in which samples are visited or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic RNG for `(seed, parts...)`.
pub fn derived_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// `round(ratio * n)` with halves rounded away from zero.
pub fn round_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_count(0.1, 5), 1);
        assert_eq!(round_count(0.1, 15), 2);
        assert_eq!(round_count(0.1, 4), 0);
        assert_eq!(round_count(0.5, 4720), 2360);
    }

    #[test]
    fn streams_depend_on_every_part() {
        let a: u64 = derived_rng(7, &["s1"]).gen();
        let b: u64 = derived_rng(7, &["s1"]).gen();
        let c: u64 = derived_rng(7, &["s2"]).gen();
        let d: u64 = derived_rng(8, &["s1"]).gen();
        let e: u64 = derived_rng(7, &["s", "1"]).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }
}
