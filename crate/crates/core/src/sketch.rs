//! The S-bitmap sketch.

use std::sync::Arc;

use crate::dimensioning::{CapacityParams, RateTable};
use crate::error::{invalid, Result};
use crate::hashing::{self, bucket_of, check_sampler_bits, sampler_of};
use crate::DistinctCounter;

/// Output of [`SBitmap::estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// `t_B` with `B = min(fill, b_max)`.
    pub n_hat: f64,
    pub fill_used: usize,
    pub theoretical_rrmse: f64,
    /// Set when the fill count exceeded the truncation level.
    pub saturated: bool,
}

impl Estimate {
    pub fn rounded(&self) -> u64 {
        self.n_hat.round() as u64
    }
}

/// Self-learning bitmap.
///
/// A new item hashed to an empty bucket sets it with probability
/// `p_{L+1}`, where `L` is the number of buckets already set. The rates
/// decrease with `L`, so an item rejected once is rejected forever and
/// duplicates never change the state.
#[derive(Debug, Clone)]
pub struct SBitmap {
    words: Vec<u64>,
    fill: usize,
    rates: Arc<RateTable>,
    seed: u64,
    sampler_bits: u32,
}

impl SBitmap {
    pub fn new(rates: Arc<RateTable>, seed: u64, sampler_bits: u32) -> Result<Self> {
        check_sampler_bits(sampler_bits)?;
        let params = rates.params();
        let floor_rate = rates.sampling_rate(params.truncation());
        if floor_rate * ((1u64 << sampler_bits) as f64) < 1.0 {
            log::warn!(
                "sampler width d={sampler_bits} is too coarse: smallest rate {floor_rate:e} < 2^-{sampler_bits}"
            );
        }
        Ok(Self {
            words: vec![0; params.bits().div_ceil(64)],
            fill: 0,
            rates,
            seed,
            sampler_bits,
        })
    }

    /// Builds the rate table and a sketch with the default sampler width.
    pub fn with_params(params: CapacityParams, seed: u64) -> Self {
        Self::new(Arc::new(RateTable::new(params)), seed, hashing::DEFAULT_SAMPLER_BITS)
            .expect("default sampler width is valid")
    }

    pub(crate) fn from_parts(
        rates: Arc<RateTable>,
        seed: u64,
        sampler_bits: u32,
        words: Vec<u64>,
    ) -> Result<Self> {
        let mut sketch = Self::new(rates, seed, sampler_bits)?;
        if words.len() != sketch.words.len() {
            return Err(invalid("bit vector length does not match m"));
        }
        let m = sketch.bits();
        if !m.is_multiple_of(64) && words.last().is_some_and(|w| w >> (m % 64) != 0) {
            return Err(invalid("bits set beyond position m"));
        }
        sketch.fill = words.iter().map(|w| w.count_ones() as usize).sum();
        sketch.words = words;
        Ok(sketch)
    }

    pub fn params(&self) -> &CapacityParams {
        self.rates.params()
    }

    pub fn rates(&self) -> &Arc<RateTable> {
        &self.rates
    }

    pub fn bits(&self) -> usize {
        self.rates.bits()
    }

    pub fn fill(&self) -> usize {
        self.fill
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampler_bits(&self) -> u32 {
        self.sampler_bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_set(&self, bucket: usize) -> bool {
        self.words[bucket / 64] >> (bucket % 64) & 1 == 1
    }

    /// Processes one item; returns whether a bucket was filled.
    pub fn update(&mut self, item: &[u8]) -> bool {
        self.update_digest(hashing::digest(self.seed, item))
    }

    /// Same as [`update`](Self::update) for a precomputed digest.
    pub fn update_digest(&mut self, digest: u64) -> bool {
        let bucket = bucket_of(digest, self.bits());
        let (word, mask) = (bucket / 64, 1u64 << (bucket % 64));
        if self.words[word] & mask != 0 {
            return false;
        }
        // u 2^-d < p  <=>  u < ceil(p 2^d) for integer u
        let rate = self.rates.sampling_rate(self.fill + 1);
        let threshold = (rate * (1u64 << self.sampler_bits) as f64).ceil() as u64;
        if u64::from(sampler_of(digest, self.sampler_bits)) >= threshold {
            return false;
        }
        self.words[word] |= mask;
        self.fill += 1;
        true
    }

    pub fn estimate(&self) -> Estimate {
        estimate_from_fill(&self.rates, self.fill)
    }
}

// the rate table is a function of the params
impl PartialEq for SBitmap {
    fn eq(&self, other: &Self) -> bool {
        self.params() == other.params()
            && self.seed == other.seed
            && self.sampler_bits == other.sampler_bits
            && self.fill == other.fill
            && self.words == other.words
    }
}

/// Estimator as a function of the fill count alone.
pub fn estimate_from_fill(rates: &RateTable, fill: usize) -> Estimate {
    let params = rates.params();
    let fill_used = fill.min(params.truncation());
    Estimate {
        n_hat: rates.expected_wait(fill_used),
        fill_used,
        theoretical_rrmse: params.epsilon(),
        saturated: fill > params.truncation(),
    }
}

impl DistinctCounter for SBitmap {
    fn insert(&mut self, item: &[u8]) {
        self.update(item);
    }

    fn estimate(&self) -> f64 {
        SBitmap::estimate(self).n_hat
    }

    fn capacity(&self) -> Option<u64> {
        Some(self.params().max_cardinality())
    }

    fn theoretical_rrmse(&self) -> Option<f64> {
        Some(self.params().epsilon())
    }
}
