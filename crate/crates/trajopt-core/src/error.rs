//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical primitives, environments and optimisers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance is not symmetric")]
    NotSymmetric,

    #[error("not positive definite")]
    NotPositiveDefinite,

    #[error("state covariance singular")]
    StateCovarianceSingular,

    #[error("degenerate weights")]
    DegenerateWeights,

    #[error("no viable samples")]
    NoViableSamples,

    #[error("log-weights contain NaN")]
    NanLogWeight,

    #[error("polynomial degree {degree} requires more than {len} points")]
    DegreeTooHigh { degree: usize, len: usize },

    #[error("dynamics blow-up at step {step}")]
    DynamicsBlowUp { step: usize },

    #[error("all trajectories failed")]
    AllTrajectoriesFailed,

    #[error("step index {step} out of range for horizon {horizon}")]
    StepOutOfRange { step: usize, horizon: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("generation {generation}: {source}")]
    Generation {
        generation: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the generation index in which the error occurred.
    pub fn at_generation(self, generation: usize) -> Error {
        Error::Generation {
            generation,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
