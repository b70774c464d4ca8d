//! Seed derivation and content hashing.
//!
//! Every stochastic step takes its own child seed derived from a master seed
//! and a tag, so results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for `(master, tag)`.
pub fn derive(master: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn derive_indexed(master: u64, tag: &str, index: u64) -> u64 {
    derive(derive(master, tag), &index.to_string())
}

/// Stable fingerprint of a row of feature values (bit-exact).
pub fn row_hash(row: &[f64]) -> u64 {
    let mut h = Sha256::new();
    for v in row {
        h.update(v.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_tag_sensitive() {
        assert_eq!(derive(7, "split"), derive(7, "split"));
        assert_ne!(derive(7, "split"), derive(7, "smote"));
        assert_ne!(derive(7, "split"), derive(8, "split"));
    }

    #[test]
    fn row_hash_distinguishes_signed_zero() {
        assert_ne!(row_hash(&[0.0]), row_hash(&[-0.0]));
        assert_eq!(row_hash(&[1.5, 2.0]), row_hash(&[1.5, 2.0]));
    }
}
