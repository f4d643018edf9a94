//! Deterministic seed derivation.
//!
//! All randomized stages derive their RNG streams from one user-facing
//! `u64` seed through [`derive_seed`]. The mixer is written out in full
//! (FNV-1a over the tag bytes, then a splitmix64 finalizer) instead of
//! using `std`'s hashers, whose output may change between toolchain
//! releases; persisted results must be reproducible across builds.

/// Derive an independent child seed from a base seed, a stage tag, and an
/// index within the stage.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    for &b in base.to_le_bytes().iter().chain(index.to_le_bytes().iter()) {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
