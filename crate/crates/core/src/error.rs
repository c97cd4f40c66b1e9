use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two tables or vectors that must agree in shape do not.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Both hypotheses have the same Gaussian law, no threshold separates them.
    #[error("no detection threshold: conditional distributions are identical")]
    NoThreshold,

    /// A detection quantity was requested before a threshold was set.
    #[error("detection threshold has not been set")]
    ThresholdUnset,

    #[error("energy budget {budget:.6e} J is below the cheapest feasible pulse ({minimum:.6e} J)")]
    InfeasibleBudget { budget: f64, minimum: f64 },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
