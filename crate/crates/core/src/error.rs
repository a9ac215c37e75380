use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A jump law, market or investor parameter is out of its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: String, reason: String },

    /// The market violates an assumption needed by the requested computation.
    #[error("market error: {0}")]
    Market(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A check that holds by construction failed; signals a numerical bug.
    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    /// The multi-asset fixed-point iteration did not reach its tolerance.
    #[error(
        "fixed-point iteration did not converge after {iterations} iterations \
         (residual {residual:e}); existence of the multi-asset root is an assumption, \
         not a theorem, for this market"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    /// A simulated wealth path left the representable range.
    #[error("wealth overflow on path {path} at t = {time}: X = {wealth}")]
    Overflow { path: u64, time: f64, wealth: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("sample length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Strategy inputs that do not belong together.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An estimator whose denominator is statistically indistinguishable from zero.
    #[error("ill-conditioned estimate: {0}")]
    IllConditioned(String),

    #[error("degenerate market: {0}")]
    DegenerateMarket(String),

    /// Too many Monte Carlo paths were discarded.
    #[error("{excluded} of {total} paths excluded (limit 1%)")]
    ExclusionThreshold { excluded: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(field: &str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
