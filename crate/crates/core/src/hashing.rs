//! Seeded digest and its split into a bucket index and a sampler value.
//!
//! The bucket comes from the top 32 bits via a fixed-point multiply, so `m`
//! need not be a power of two. The sampler comes from the low `d <= 32` bits.
//! The two bit ranges never overlap, which keeps bucket and sampler
//! independent for an ideal hash.

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{invalid, Result};

pub const DEFAULT_SAMPLER_BITS: u32 = 30;
pub const MAX_SAMPLER_BITS: u32 = 32;

/// Seeded 64-bit digest of `item` (XXH3).
#[inline]
pub fn digest(seed: u64, item: &[u8]) -> u64 {
    xxh3_64_with_seed(item, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashSplit {
    pub bucket: usize,
    pub sampler: u32,
}

/// Bucket in `[0, buckets)` from the top 32 bits.
#[inline]
pub fn bucket_of(digest: u64, buckets: usize) -> usize {
    (((digest >> 32) * buckets as u64) >> 32) as usize
}

/// Low `width` bits as an integer in `[0, 2^width)`.
#[inline]
pub fn sampler_of(digest: u64, width: u32) -> u32 {
    (digest & (u64::MAX >> (64 - width))) as u32
}

pub fn check_sampler_bits(width: u32) -> Result<()> {
    if !(1..=MAX_SAMPLER_BITS).contains(&width) {
        return Err(invalid(format!(
            "sampler width must be in 1..={MAX_SAMPLER_BITS}, got {width}"
        )));
    }
    Ok(())
}

pub fn check_buckets(buckets: usize) -> Result<()> {
    if buckets == 0 || buckets as u64 > 1 << 32 {
        return Err(invalid(format!("bucket count must be in 1..=2^32, got {buckets}")));
    }
    Ok(())
}

pub fn split(digest: u64, buckets: usize, width: u32) -> Result<HashSplit> {
    check_buckets(buckets)?;
    check_sampler_bits(width)?;
    Ok(HashSplit {
        bucket: bucket_of(digest, buckets),
        sampler: sampler_of(digest, width),
    })
}

/// SplitMix64 finalizer, used to derive independent seeds from `(seed, index)`.
#[inline]
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
