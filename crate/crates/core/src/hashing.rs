//! Content hashes recorded as provenance in every written artifact.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
///
/// Struct fields serialize in declaration order, so the hash is stable for a
/// given type layout.
pub fn json_hash<T: serde::Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("in-memory JSON encoding cannot fail");
    sha256_hex(&bytes)
}
