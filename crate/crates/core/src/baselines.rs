//! Comparison sketches: linear counting, LogLog and HyperLogLog.

use std::f64::consts::{LN_2, PI};

use crate::error::{invalid, Error, Result};
use crate::hashing::{bucket_of, check_buckets, digest};
use crate::DistinctCounter;

/// Bits charged per register in memory comparisons.
pub const REGISTER_BITS: usize = 5;

/// Plain bitmap with the estimator `m ln(m / (m - |V|))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCounter {
    words: Vec<u64>,
    bits: usize,
    fill: usize,
    seed: u64,
}

impl LinearCounter {
    pub fn new(bits: usize, seed: u64) -> Result<Self> {
        check_buckets(bits)?;
        Ok(Self {
            words: vec![0; bits.div_ceil(64)],
            bits,
            fill: 0,
            seed,
        })
    }

    pub(crate) fn from_parts(bits: usize, seed: u64, words: Vec<u64>) -> Result<Self> {
        let mut counter = Self::new(bits, seed)?;
        if words.len() != counter.words.len() {
            return Err(invalid("bit vector length does not match m"));
        }
        if !bits.is_multiple_of(64) && words.last().is_some_and(|w| w >> (bits % 64) != 0) {
            return Err(invalid("bits set beyond position m"));
        }
        counter.fill = words.iter().map(|w| w.count_ones() as usize).sum();
        counter.words = words;
        Ok(counter)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn fill(&self) -> usize {
        self.fill
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn memory_bits(&self) -> usize {
        self.bits
    }

    pub fn update(&mut self, item: &[u8]) -> bool {
        self.update_digest(digest(self.seed, item))
    }

    pub fn update_digest(&mut self, digest: u64) -> bool {
        let bucket = bucket_of(digest, self.bits);
        let (word, mask) = (bucket / 64, 1u64 << (bucket % 64));
        if self.words[word] & mask != 0 {
            return false;
        }
        self.words[word] |= mask;
        self.fill += 1;
        true
    }

    pub fn estimate(&self) -> Result<f64> {
        lc_estimate(self.bits, self.fill)
    }
}

/// Linear counting estimate for `filled` of `buckets` set.
pub fn lc_estimate(buckets: usize, filled: usize) -> Result<f64> {
    if filled >= buckets {
        return Err(Error::Saturated(buckets));
    }
    let m = buckets as f64;
    Ok(m * (m / (m - filled as f64)).ln())
}

impl DistinctCounter for LinearCounter {
    fn insert(&mut self, item: &[u8]) {
        self.update(item);
    }

    /// Saturated counters report the estimate for one empty bucket.
    fn estimate(&self) -> f64 {
        lc_estimate(self.bits, self.fill.min(self.bits - 1)).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogMode {
    LogLog,
    HyperLogLog,
}

impl LogMode {
    /// Asymptotic standard-error constant: RRMSE ≈ constant / √registers.
    pub fn error_constant(self) -> f64 {
        match self {
            LogMode::LogLog => 1.30,
            LogMode::HyperLogLog => 1.04,
        }
    }
}

const MIN_REGISTERS: usize = 16;

/// Register sketch shared by LogLog and HyperLogLog.
///
/// Each digest selects a register from its top 32 bits and contributes the
/// rank (position of the first one-bit, 1-based) of its low 32 bits, so
/// register values never exceed 33.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRegisterSketch {
    registers: Vec<u8>,
    mode: LogMode,
    seed: u64,
}

impl LogRegisterSketch {
    pub fn new(registers: usize, mode: LogMode, seed: u64) -> Result<Self> {
        check_buckets(registers)?;
        if registers < MIN_REGISTERS {
            return Err(invalid(format!(
                "need at least {MIN_REGISTERS} registers, got {registers}"
            )));
        }
        Ok(Self {
            registers: vec![0; registers],
            mode,
            seed,
        })
    }

    /// Sketch with as many registers as fit in `bits` at [`REGISTER_BITS`] each.
    pub fn with_memory(bits: usize, mode: LogMode, seed: u64) -> Result<Self> {
        Self::new(bits / REGISTER_BITS, mode, seed)
    }

    pub(crate) fn from_parts(mode: LogMode, seed: u64, registers: Vec<u8>) -> Result<Self> {
        let mut sketch = Self::new(registers.len(), mode, seed)?;
        if registers.iter().any(|&r| r > 33) {
            return Err(invalid("register value exceeds 33"));
        }
        sketch.registers = registers;
        Ok(sketch)
    }

    pub fn mode(&self) -> LogMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn registers(&self) -> &[u8] {
        &self.registers
    }

    pub fn memory_bits(&self) -> usize {
        self.registers.len() * REGISTER_BITS
    }

    pub fn update(&mut self, item: &[u8]) -> bool {
        self.update_digest(digest(self.seed, item))
    }

    pub fn update_digest(&mut self, digest: u64) -> bool {
        let idx = bucket_of(digest, self.registers.len());
        let rank = (digest as u32).leading_zeros() as u8 + 1;
        if rank > self.registers[idx] {
            self.registers[idx] = rank;
            true
        } else {
            false
        }
    }

    pub fn estimate(&self) -> f64 {
        log_family_estimate(self.mode, &self.registers)
    }
}

fn hll_alpha(registers: usize) -> f64 {
    match registers {
        16 => 0.673,
        32 => 0.697,
        64 => 0.709,
        k => 0.7213 / (1.0 + 1.079 / k as f64),
    }
}

fn loglog_alpha(registers: usize) -> f64 {
    0.39701 - (2.0 * PI * PI + LN_2 * LN_2) / (48.0 * registers as f64)
}

/// LogLog geometric-mean or HyperLogLog harmonic-mean estimate.
///
/// HyperLogLog switches to linear counting on the empty registers when the
/// raw estimate is at most `2.5 k`.
pub fn log_family_estimate(mode: LogMode, registers: &[u8]) -> f64 {
    let k = registers.len();
    let kf = k as f64;
    let zeros = registers.iter().filter(|&&r| r == 0).count();
    if zeros == k {
        return 0.0;
    }
    match mode {
        LogMode::HyperLogLog => {
            let harmonic: f64 = registers.iter().map(|&r| (-f64::from(r)).exp2()).sum();
            let raw = hll_alpha(k) * kf * kf / harmonic;
            if raw <= 2.5 * kf && zeros > 0 {
                kf * (kf / zeros as f64).ln()
            } else {
                raw
            }
        }
        LogMode::LogLog => {
            let mean = registers.iter().map(|&r| f64::from(r)).sum::<f64>() / kf;
            loglog_alpha(k) * kf * mean.exp2()
        }
    }
}

impl DistinctCounter for LogRegisterSketch {
    fn insert(&mut self, item: &[u8]) {
        self.update(item);
    }

    fn estimate(&self) -> f64 {
        LogRegisterSketch::estimate(self)
    }

    fn theoretical_rrmse(&self) -> Option<f64> {
        Some(self.mode.error_constant() / (self.registers.len() as f64).sqrt())
    }
}
