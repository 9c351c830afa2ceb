//! Stable seed derivation.
//!
//! Every stochastic consumer derives its own seed from a root seed and a
//! purpose label, so adding a consumer never shifts the streams of others.
//! The hash is FNV-1a over the label followed by a SplitMix64 finalizer; it
//! is fixed forever and independent of the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of an arbitrary byte string.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Seed for the consumer identified by `label` under `root`.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + label.len());
    bytes.extend_from_slice(&root.to_le_bytes());
    bytes.extend_from_slice(label.as_bytes());
    stable_hash(&bytes)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(root: u64, label: &str) -> ChaCha8Rng {
    rng_from_seed(derive_seed(root, label))
}
