//! Keyed collection of S-bitmaps, one per key (for example one per network
//! link), all sharing a single rate table, seed and sampler width.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dimensioning::RateTable;
use crate::error::{invalid, Result};
use crate::hashing::check_sampler_bits;
use crate::sketch::{Estimate, SBitmap};

pub const DEFAULT_MAX_KEYS: usize = 1 << 20;

#[derive(Debug, Clone)]
pub struct SketchRegistry {
    rates: Arc<RateTable>,
    seed: u64,
    sampler_bits: u32,
    max_keys: usize,
    sketches: BTreeMap<Vec<u8>, SBitmap>,
}

impl SketchRegistry {
    pub fn new(rates: Arc<RateTable>, seed: u64, sampler_bits: u32, max_keys: usize) -> Result<Self> {
        check_sampler_bits(sampler_bits)?;
        if max_keys == 0 {
            return Err(invalid("max_keys must be positive"));
        }
        Ok(Self {
            rates,
            seed,
            sampler_bits,
            max_keys,
            sketches: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.sketches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sketches.is_empty()
    }

    pub fn rates(&self) -> &Arc<RateTable> {
        &self.rates
    }

    /// Routes `item` to the sketch for `key`, creating it on first use.
    ///
    /// Fails rather than evicting once `max_keys` distinct keys exist.
    pub fn update(&mut self, key: &[u8], item: &[u8]) -> Result<bool> {
        if let Some(sketch) = self.sketches.get_mut(key) {
            return Ok(sketch.update(item));
        }
        if self.sketches.len() >= self.max_keys {
            return Err(invalid(format!("registry is full ({} keys)", self.max_keys)));
        }
        let mut sketch = SBitmap::new(self.rates.clone(), self.seed, self.sampler_bits)?;
        let flipped = sketch.update(item);
        self.sketches.insert(key.to_vec(), sketch);
        Ok(flipped)
    }

    pub fn get(&self, key: &[u8]) -> Option<&SBitmap> {
        self.sketches.get(key)
    }

    /// Estimates in ascending key order.
    pub fn estimates(&self) -> impl Iterator<Item = (&[u8], Estimate)> {
        self.sketches.iter().map(|(k, s)| (k.as_slice(), s.estimate()))
    }
}
