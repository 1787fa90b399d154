use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, invalid spec, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A mathematical precondition does not hold (e.g. spectral radius >= 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// An object violates an invariant it is supposed to carry.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A numerical procedure broke down (stagnation, loss of positivity, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative method did not reach its tolerance.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// An inner solve of the alternating scheme failed at the given stage.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    /// The system does not satisfy the hypotheses required by the scheme.
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
