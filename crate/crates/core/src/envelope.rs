//! Self-describing JSON envelopes for sketches.
//!
//! Bit vectors are stored as base64 of their little-endian bytes, `ceil(m/8)`
//! bytes long. Decoding rebuilds the sketch from its parameters and rejects
//! anything whose stored fields disagree with the rebuilt state.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::baselines::{LinearCounter, LogMode, LogRegisterSketch};
use crate::dimensioning::{solve_capacity, RateTable};
use crate::error::{Error, Result};
use crate::sketch::SBitmap;

const PRECISION_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Envelope {
    Sbitmap {
        m: usize,
        #[serde(rename = "N")]
        max_cardinality: u64,
        #[serde(rename = "C")]
        precision: f64,
        d: u32,
        seed: u64,
        fill: usize,
        bits: String,
    },
    Linear {
        m: usize,
        seed: u64,
        fill: usize,
        bits: String,
    },
    Loglog {
        registers: usize,
        seed: u64,
        values: String,
    },
    Hyperloglog {
        registers: usize,
        seed: u64,
        values: String,
    },
}

fn encode_words(words: &[u64], bits: usize) -> String {
    let mut bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
    bytes.truncate(bits.div_ceil(8));
    STANDARD.encode(bytes)
}

fn decode_words(text: &str, bits: usize) -> Result<Vec<u64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Envelope(format!("bad base64: {e}")))?;
    if bytes.len() != bits.div_ceil(8) {
        return Err(Error::Envelope(format!(
            "expected {} bytes for {bits} bits, got {}",
            bits.div_ceil(8),
            bytes.len()
        )));
    }
    let mut words = vec![0u64; bits.div_ceil(64)];
    for (i, b) in bytes.iter().enumerate() {
        words[i / 8] |= u64::from(*b) << (8 * (i % 8));
    }
    Ok(words)
}

fn envelope_err(e: Error) -> Error {
    match e {
        Error::Envelope(_) => e,
        other => Error::Envelope(other.to_string()),
    }
}

impl Envelope {
    pub fn from_sbitmap(sketch: &SBitmap) -> Self {
        let params = sketch.params();
        Envelope::Sbitmap {
            m: params.bits(),
            max_cardinality: params.max_cardinality(),
            precision: params.precision(),
            d: sketch.sampler_bits(),
            seed: sketch.seed(),
            fill: sketch.fill(),
            bits: encode_words(sketch.words(), params.bits()),
        }
    }

    pub fn from_linear(counter: &LinearCounter) -> Self {
        Envelope::Linear {
            m: counter.bits(),
            seed: counter.seed(),
            fill: counter.fill(),
            bits: encode_words(counter.words(), counter.bits()),
        }
    }

    pub fn from_log_registers(sketch: &LogRegisterSketch) -> Self {
        let registers = sketch.registers().len();
        let values = STANDARD.encode(sketch.registers());
        match sketch.mode() {
            LogMode::LogLog => Envelope::Loglog { registers, seed: sketch.seed(), values },
            LogMode::HyperLogLog => Envelope::Hyperloglog { registers, seed: sketch.seed(), values },
        }
    }

    /// Rebuilds an S-bitmap, recomputing the rate table from `(m, N)`.
    pub fn to_sbitmap(&self) -> Result<SBitmap> {
        let Envelope::Sbitmap { m, max_cardinality, precision, d, seed, fill, bits } = self else {
            return Err(Error::Envelope("not an sbitmap envelope".into()));
        };
        let params = solve_capacity(*m, *max_cardinality).map_err(envelope_err)?;
        if ((params.precision() - precision) / precision).abs() > PRECISION_REL_TOL {
            return Err(Error::Envelope(format!(
                "stored C={precision} disagrees with C={} solved from (m, N)",
                params.precision()
            )));
        }
        let words = decode_words(bits, *m)?;
        let sketch = SBitmap::from_parts(Arc::new(RateTable::new(params)), *seed, *d, words)
            .map_err(envelope_err)?;
        if sketch.fill() != *fill {
            return Err(Error::Envelope(format!(
                "fill {fill} does not match popcount {}",
                sketch.fill()
            )));
        }
        Ok(sketch)
    }

    /// Like [`to_sbitmap`](Self::to_sbitmap) but reuses a shared rate table,
    /// which must match the stored `(m, N)`.
    pub fn to_sbitmap_with(&self, rates: Arc<RateTable>) -> Result<SBitmap> {
        let sketch = self.to_sbitmap()?;
        if sketch.params() != rates.params() {
            return Err(Error::Envelope("envelope parameters differ from the shared table".into()));
        }
        SBitmap::from_parts(rates, sketch.seed(), sketch.sampler_bits(), sketch.words().to_vec())
            .map_err(envelope_err)
    }

    pub fn to_linear(&self) -> Result<LinearCounter> {
        let Envelope::Linear { m, seed, fill, bits } = self else {
            return Err(Error::Envelope("not a linear envelope".into()));
        };
        let words = decode_words(bits, *m)?;
        let counter = LinearCounter::from_parts(*m, *seed, words).map_err(envelope_err)?;
        if counter.fill() != *fill {
            return Err(Error::Envelope(format!(
                "fill {fill} does not match popcount {}",
                counter.fill()
            )));
        }
        Ok(counter)
    }

    pub fn to_log_registers(&self) -> Result<LogRegisterSketch> {
        let (mode, registers, seed, values) = match self {
            Envelope::Loglog { registers, seed, values } => (LogMode::LogLog, registers, seed, values),
            Envelope::Hyperloglog { registers, seed, values } => {
                (LogMode::HyperLogLog, registers, seed, values)
            }
            _ => return Err(Error::Envelope("not a register envelope".into())),
        };
        let bytes = STANDARD
            .decode(values)
            .map_err(|e| Error::Envelope(format!("bad base64: {e}")))?;
        if bytes.len() != *registers {
            return Err(Error::Envelope(format!(
                "expected {registers} registers, got {}",
                bytes.len()
            )));
        }
        LogRegisterSketch::from_parts(mode, *seed, bytes).map_err(envelope_err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Envelope(e.to_string()))
    }
}
