use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A small-parameter expansion was asked to operate where it does not hold.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// The perturbative mode probabilities left [0, 1].
    #[error("mode probability p1 = {p1} outside [0, 1]; separation too large for the expansion")]
    OutOfExpansionRange { p1: f64 },

    /// Hermite-Gauss mode indices above 2 are not modelled.
    #[error("mode index {index} out of range (maximum 2)")]
    IndexOutOfRange { index: usize },

    /// `p` puts mass on an outcome `q` rules out.
    #[error("relative entropy is infinite: reference distribution has no mass on outcome {outcome}")]
    InfiniteDivergence { outcome: usize },

    #[error("empty trial batch")]
    EmptyBatch,

    #[error("no root: {0}")]
    NoRoot(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::OutOfRegime(msg.into())
    }
}
