//! Content digests and seed derivation.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of the canonical (compact serde_json) serialization of `value`.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("in-memory values always serialize");
    sha256_hex(&bytes)
}

/// Derives an independent 64-bit seed from a base seed and a path of tags
/// (splitmix64 finalizer applied per tag).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base;
    for &tag in tags {
        state = mix(state ^ mix(tag.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    mix(state)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
