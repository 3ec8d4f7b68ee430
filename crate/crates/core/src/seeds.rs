//! Deterministic seed derivation.
//!
//! Every randomized stage draws its seed as a pure function of the global
//! seed plus a list of scope labels (language, condition, split, stage),
//! so reruns and cross-machine runs agree byte for byte.

use sha2::{Digest, Sha256};

/// Derive a 64-bit seed from a global seed and scope labels.
pub fn derive_seed(global: u64, scope: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    for part in scope {
        hasher.update([0xff]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
