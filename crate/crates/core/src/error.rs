//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by construction, oracles, and experiments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A distribution failed its construction invariants.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// Perturbation radius outside `[0, 1]`.
    #[error("epsilon {0} is outside [0, 1]")]
    InvalidEpsilon(f64),
    /// A perturbation landed outside its Kolmogorov ball (internal check).
    #[error("perturbation left the epsilon ball: d_K {distance} > epsilon {epsilon}")]
    PerturbationBall { distance: f64, epsilon: f64 },
    /// Box cost must be a finite nonnegative number.
    #[error("cost must be finite and nonnegative, got {0}")]
    NegativeCost(f64),
    /// An instance needs at least one box.
    #[error("instance must contain at least one box")]
    EmptyInstance,
    /// Vector lengths disagree with the instance size.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Thresholds must be finite reals.
    #[error("non-finite threshold at index {0}")]
    NonFiniteThreshold(usize),
    /// Exact enumeration requires discrete value laws.
    #[error("exact oracle requires a discrete distribution in box {0}")]
    UnsupportedContinuous(usize),
    /// The outcome-space product exceeds the enumeration cap.
    #[error("support product {size} exceeds enumeration cap {cap}")]
    ExplosionCap { size: u128, cap: u128 },
    /// Paired instances must share costs box by box.
    #[error("cost vectors differ at box {0}")]
    CostMismatch(usize),
    /// Conditioning prefix must leave at least the pinned box.
    #[error("prefix of length {prefix} does not fit an instance of {n} boxes")]
    PrefixTooLong { prefix: usize, n: usize },
    /// Conditional evaluation requires nonincreasing thresholds.
    #[error("boxes must be ordered by nonincreasing threshold (violated at index {0})")]
    UnorderedThresholds(usize),
    /// A sweep or search configuration is invalid.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// An instance or config file failed to parse.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
