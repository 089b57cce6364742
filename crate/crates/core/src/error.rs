use std::ops::Range;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range; `field` names it.
    #[error("invalid {field}: {reason}")]
    Range { field: &'static str, reason: String },

    #[error("t = KM/N is not an integer for K = {k}, N = {n}, M = {m}; centralized placement needs integer t")]
    NonIntegerT { k: usize, n: usize, m: String },

    #[error("file size of {bits} bits is not divisible into {segments} equal segments")]
    Divisibility { bits: usize, segments: u64 },

    #[error("channel gain {gain:e} at position {index} is below the 1e-12 floor")]
    ZeroGain { index: usize, gain: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("power share {value:e} at position {index} is negative")]
    NegativePower { index: usize, value: f64 },

    #[error("power shares sum to {sum}, which exceeds 1")]
    PowerOverflow { sum: f64 },

    #[error("rate {value:e} at position {index} is negative or not finite")]
    InvalidRate { index: usize, value: f64 },

    #[error("rate vector lies outside the capacity region (boundary lhs = {lhs})")]
    InfeasibleRates { lhs: f64 },

    #[error("invalid load profile: {0}")]
    InvalidLoads(String),

    #[error("bracket hint {hint} has g = {value} > 0")]
    BadBracket { hint: f64, value: f64 },

    #[error("bisection did not converge within {iterations} iterations")]
    MaxIterations { iterations: usize },

    #[error("user {user} could not decode: missing bit ranges {missing:?}")]
    DecodeFailure {
        user: usize,
        missing: Vec<Range<usize>>,
    },

    #[error("trial with seed {seed} failed: {source}")]
    Trial { seed: u64, source: Box<Error> },

    #[error("trial with seed {seed} at M = {cache} violated {what} (value {value})")]
    Violation {
        seed: u64,
        cache: String,
        what: &'static str,
        value: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
