use thiserror::Error;

/// Errors raised by the NEPv library.
///
/// Hypothesis failures of the perturbation bounds are not errors; they are
/// reported as [`crate::Bound::Unavailable`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("eigensolver failed to converge on a {0}x{0} matrix")]
    EigensolverFailure(usize),

    #[error("SCF diverged at iteration {iteration}: operator has non-finite entries")]
    Divergence { iteration: usize },

    #[error("spectral gap g = {0:e} is not positive")]
    GapViolation(f64),

    #[error("V is not a solution: relative residual {relative_residual:e} exceeds {tolerance:e}")]
    NotASolution { relative_residual: f64, tolerance: f64 },

    #[error("supremum unavailable: {0}")]
    Unavailable(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
