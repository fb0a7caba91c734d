use thiserror::Error;

use crate::gridops::SampledFunction;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid derivative spec: {0}")]
    InvalidSpec(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("length mismatch: expected {expected}, got {got} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("exponent {exponent} is not admissible (power sums need exponents > -1)")]
    InadmissibleExponent { exponent: f64 },

    #[error("derivative at stage {stage} leaves the power-law algebra (exponent {exponent} in (-1, 0))")]
    DerivativeLeavesAlgebra { stage: usize, exponent: f64 },

    #[error("value at zero undefined at stage {stage}: term with exponent {exponent}")]
    EvaluationAtZeroUndefined { stage: usize, exponent: f64 },

    #[error("argument {0} is outside the domain of the operation")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Picard iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Box<SampledFunction>,
    },

    #[error("non-finite value encountered: {0}")]
    NotFinite(String),

    #[error("infeasible fit problem: {0}")]
    Infeasible(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::EvaluationAtZeroUndefined { .. }
                | Error::DerivativeLeavesAlgebra { .. }
                | Error::NotFinite(_)
        )
    }
}
