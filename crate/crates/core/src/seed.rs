use sha2::{Digest, Sha256};

/// Derives an independent 64-bit seed from a parent seed and a label.
///
/// Stable across platforms and releases: the first eight bytes of
/// SHA-256(parent_le || label), read little-endian.
pub fn derive(parent: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Hex SHA-256 of arbitrary bytes.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
