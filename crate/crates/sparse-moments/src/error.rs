//! Error type shared across the crate.

use thiserror::Error;

/// Failure modes of mixture, moment and recovery operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Two mixtures live on different domains.
    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(String, String),

    /// Transport instance exceeds the hard size cap.
    #[error("transport instance too large: {0}x{1} spikes (cap {2})")]
    TooLarge(usize, usize, usize),

    /// Weight repair has no feasible probability vector.
    #[error("infeasible weight repair: no positive mass on the support")]
    Infeasible,

    /// A 2-D moment grid is missing a required entry.
    #[error("missing moment ({0},{1})")]
    MissingMoment(usize, usize),

    /// Unregularized solve hit a numerically singular system.
    #[error("singular system in unregularized solve")]
    SingularSystem,

    /// Zero jitter requested on a support with duplicate points.
    #[error("degenerate support: duplicate nodes with zero jitter")]
    DegenerateSupport,

    /// Fitted weights sum to (nearly) zero, so they cannot be normalized.
    #[error("normalization failure: fitted weight sum {0} too close to zero")]
    NormalizationFailure(f64),

    /// Input fails a structural precondition.
    #[error("bad input: {0}")]
    BadInput(String),

    /// Requested moment degree exceeds the snapshot length.
    #[error("insufficient snapshot: need total degree <= {have}, requested {need}")]
    InsufficientSnapshot { need: usize, have: usize },

    /// Projection direction has (numerically) zero variance.
    #[error("degenerate direction: r'Sigma r = {0} below threshold")]
    DegenerateDirection(f64),

    /// Mixture violates its invariants.
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    /// Oracle query violates the oracle contract.
    #[error("invalid oracle query: {0}")]
    InvalidQuery(String),

    /// Binomial coefficient does not fit in 64 bits.
    #[error("binomial overflow: C({0},{1}) exceeds exact 64-bit range")]
    BinomialOverflow(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
