use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "no precision constant reaches N={max_cardinality} with m={bits} bits; \
         at least {min_bits} bits are required"
    )]
    NoSolution {
        bits: usize,
        max_cardinality: u64,
        min_bits: usize,
    },

    #[error("linear counter saturated: all {0} buckets filled")]
    Saturated(usize),

    #[error("dynamic program needs {cells} cell updates, budget is {budget}")]
    ResourceLimit { cells: u128, budget: u128 },

    #[error("malformed envelope: {0}")]
    Envelope(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
