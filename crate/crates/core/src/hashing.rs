//! Stable 64-bit hashing used for token bucketing, config fingerprints, and
//! per-phase seed derivation. FNV-1a is fixed so encodings are reproducible
//! across runs and platforms.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// splitmix64 finalizer; decorrelates related seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG seed from a base seed and a purpose tag.
/// Every random stream in the trainer is keyed this way, so each phase is
/// reproducible in isolation (resumed runs match uninterrupted ones).
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    splitmix64(base ^ fnv1a64(tag.as_bytes()))
}
