use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in `{evaluator}`: expected {expected}, found {found}")]
    Dimension {
        evaluator: String,
        expected: String,
        found: String,
    },

    #[error("{what} is not symmetric positive definite")]
    NotPositiveDefinite { what: String },

    #[error("QP infeasible: row {row} violated by {violation:e}")]
    Infeasible { row: usize, violation: f64 },

    #[error("strict feasibility violated: |gᵀ∇h| = {norm:e} while the CBF row requires action")]
    StrictFeasibility { norm: f64 },

    #[error("state is not on the safe-set boundary (h = {h:e})")]
    NotOnBoundary { h: f64 },

    #[error("state is outside the safe set (h = {h:e})")]
    OutsideSafeSet { h: f64 },

    #[error("D = g G⁻¹ gᵀ is not constant (max deviation {deviation:e})")]
    NonConstantD { deviation: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{what} did not converge (residual {residual:e})")]
    Convergence { what: String, residual: f64 },
}

impl Error {
    pub(crate) fn dim(evaluator: &str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            evaluator: evaluator.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
