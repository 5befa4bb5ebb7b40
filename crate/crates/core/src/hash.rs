//! Stable 64-bit hashing.
//!
//! Feature hashing and seed derivation both need a hash that is identical
//! across processes, platforms, and compiler versions, so the std hasher
//! (which makes no stability promise) is not usable here. FNV-1a is fixed by
//! its two constants and operates byte-by-byte.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derives a child seed from `(seed, label, index)`.
///
/// Used to give every stochastic stage of a run (stream sampling, embedder
/// init, buffer sampling, fine-tune shuffling) its own independent stream
/// while staying reproducible from a single master seed.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut bytes = Vec::with_capacity(16 + label.len());
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(label.as_bytes());
    bytes.extend_from_slice(&index.to_le_bytes());
    fnv1a64(&bytes)
}
