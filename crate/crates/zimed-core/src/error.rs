//! Error type shared across the estimation pipeline.

use alloc::string::String;

/// Everything that can go wrong while evaluating the model or fitting it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A link produced a non-finite location (for example `exp` overflowed).
    #[error("non-finite mediator location from link (linear predictor {linear_predictor})")]
    NonFiniteLocation { linear_predictor: f64 },

    /// A parameter failed validation (non-finite, or out of its domain).
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// A mediator value outside `[0, ∞)` or a non-finite input was supplied.
    #[error("invalid mediator value {value}")]
    InvalidMediator { value: f64 },

    /// A positive observed mediator is certain to be recorded as zero, so its
    /// likelihood contribution is log(0). Happens only when `eta == 0` and the
    /// value lies at or below the detection ceiling.
    #[error("degenerate likelihood: positive mediator {m} is observed as zero with probability one")]
    DegenerateLikelihood { m: f64 },

    /// Adaptive quadrature could not reach the requested relative tolerance.
    #[error("quadrature failed to reach relative tolerance {requested:e} (achieved {achieved:e})")]
    QuadratureFailure { requested: f64, achieved: f64 },

    /// The data set cannot identify the model.
    #[error("non-identifiable data set: {reason}")]
    NonIdentifiable { reason: String },

    /// A requested model family cannot be applied to the data.
    #[error("{family} requires integer-valued mediators, but the data has non-integer positives")]
    FamilyNotApplicable { family: &'static str },

    /// A likelihood or objective evaluation returned a non-finite value where
    /// a finite one is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;
