use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("division by a zero design probability for arm {arm} at context {context}")]
    ZeroPropensity { arm: usize, context: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver did not converge after {iterations} iterations: {what}")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("ellipsoid shape matrix lost positive definiteness at iteration {iteration} (log-volume trace tail: {trace:?})")]
    Degenerate { iteration: usize, trace: Vec<f64> },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Infeasible
                | Error::Unbounded
                | Error::NoConvergence { .. }
                | Error::Degenerate { .. }
                | Error::Invariant(_)
                | Error::ZeroPropensity { .. }
        )
    }
}
