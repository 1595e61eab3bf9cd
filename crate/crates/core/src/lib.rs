//! Self-learning bitmap (S-bitmap) distinct counting.
//!
//! An S-bitmap is an `m`-bit vector whose buckets are filled by an adaptive
//! sampling process: the sampling rate for a new item depends only on how many
//! buckets are already set, and the rates are chosen so that the relative
//! error of the estimate is the same for every cardinality in `1..=N`.
//!
//! The crate is organised as:
//!
//! - [`dimensioning`]: capacity equation, sampling-rate schedule and memory models.
//! - [`hashing`]: seeded 64-bit digest and its split into bucket and sampler.
//! - [`sketch`]: the [`SBitmap`] sketch and its estimator.
//! - [`baselines`]: linear counting, LogLog and HyperLogLog for comparison.
//! - [`oracle`]: exact dynamic program and stochastic simulators of the fill process.
//! - [`harness`]: Monte-Carlo error sweeps and analytic memory tables.
//! - [`registry`]: keyed collection of sketches sharing one configuration.
//! - [`envelope`]: JSON serialization of sketches.

pub mod baselines;
pub mod dimensioning;
pub mod envelope;
mod error;
pub mod harness;
pub mod hashing;
pub mod oracle;
pub mod registry;
pub mod sketch;

pub use dimensioning::{CapacityParams, RateTable};
pub use error::{Error, Result};
pub use sketch::{Estimate, SBitmap};

/// Common interface used by the simulation harness.
pub trait DistinctCounter {
    fn insert(&mut self, item: &[u8]);

    /// Current cardinality estimate.
    fn estimate(&self) -> f64;

    /// Largest cardinality the sketch was dimensioned for, if any.
    fn capacity(&self) -> Option<u64> {
        None
    }

    /// Relative error predicted by theory, if the sketch has one.
    fn theoretical_rrmse(&self) -> Option<f64> {
        None
    }
}
