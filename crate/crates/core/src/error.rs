//! Error type shared across the crate.

use thiserror::Error;

/// Unified error type for profile construction, solves and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A viscosity profile evaluated to a non-positive value.
    #[error("viscosity must be strictly positive: mu({y}) = {value}")]
    NonPositiveViscosity { y: f64, value: f64 },

    /// Grid sizes must be powers of two with at least 16 points.
    #[error("grid size {0} is not a power of two >= 16")]
    BadGridSize(usize),

    /// An operation needed more sample points than were supplied.
    #[error("{context}: need at least {needed} points, got {got}")]
    TooFewPoints {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    /// Two buffers that must agree in length did not.
    #[error("{context}: length mismatch ({left} vs {right})")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// The horizontal wavenumber k must be a nonzero integer.
    #[error("horizontal wavenumber must be nonzero")]
    ZeroWavenumber,

    /// The equilibrium requires U' >= 1 everywhere; reachable by scaling sigma.
    #[error(
        "shear normalization violated: min U' = {min_uprime:.6e} < 1; \
         scale sigma by >= {suggested:.6e} to restore U' >= 1"
    )]
    Normalization { min_uprime: f64, suggested: f64 },

    /// A linear solve hit a (numerically) singular matrix.
    #[error("singular linear system in {0}")]
    SingularSolve(&'static str),

    /// The partition builder produced an interval shorter than the minimum.
    #[error(
        "partition interval {index} has length {length:.6e} < 1; \
         the viscosity varies too fast for the interval decomposition"
    )]
    IntervalTooShort { index: usize, length: f64 },

    /// A per-interval extension exceeded the allowed viscosity ratio.
    #[error(
        "extension {index} has max(mu_j)/min(mu_j) = {ratio:.3} > {limit}; \
         localization would not control the mode"
    )]
    ExtensionRatio {
        index: usize,
        ratio: f64,
        limit: f64,
    },

    /// The partition builder exceeded the interval-count cap.
    #[error("partition needs more than {0} intervals; domain too wide for the profile")]
    TooManyIntervals(usize),

    /// Invalid or inconsistent run configuration.
    #[error("config: {0}")]
    Config(String),

    /// A weighted norm was asked to use a negative weight.
    #[error("negative weight {value:.6e} at index {index} in {context}")]
    NegativeWeight {
        context: &'static str,
        index: usize,
        value: f64,
    },

    /// An energy that must be positive was not (empty or zero field).
    #[error("{0} is not strictly positive; cannot form a logarithmic rate")]
    NonPositiveEnergy(&'static str),

    /// No coefficient ladder made the graded energy monotone.
    #[error(
        "no coefficient ratio in the ladder makes E_{order} nonincreasing; \
         worst violation {violation:.3e} at t = {time:.6}"
    )]
    CoefficientSearch {
        order: usize,
        violation: f64,
        time: f64,
    },

    /// A fit or window query matched no samples.
    #[error("{0}: no samples in the requested window")]
    EmptyWindow(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
