use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("truncation error: {0}")]
    Truncation(String),

    /// A construction produced an object that violates its own invariants.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical failure: {reason} (achieved tolerance {achieved:e})")]
    Numerical { reason: String, achieved: f64 },

    #[error("degenerate tail: T({rho}) = {value:e} is not positive")]
    DegenerateTail { rho: f64, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("matrix of size {n} exceeds the memory budget of {budget} entries; try lambda <= {suggested_lambda:.3}")]
    Size {
        n: usize,
        budget: usize,
        suggested_lambda: f64,
    },

    #[error("eigenvalue {value:e} lies outside [-{eps:e}, 1+{eps:e}]")]
    SpectrumValidity { value: f64, eps: f64 },

    #[error("operator is not Hermitian: defect {defect:e} exceeds {limit:e}")]
    NonHermitian { defect: f64, limit: f64 },

    #[error("integrability error: {0}")]
    Integrability(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("lambda grids do not match: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical algorithm, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. }
                | Error::DegenerateTail { .. }
                | Error::SpectrumValidity { .. }
                | Error::NonHermitian { .. }
                | Error::Consistency(_)
                | Error::Fit(_)
        )
    }
}
