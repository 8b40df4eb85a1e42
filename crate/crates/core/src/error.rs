use thiserror::Error;

use crate::fano::PhysicalityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An input violated a structural invariant (range, symmetry, orthogonality, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A spectral quantity was requested outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The coefficients do not assemble to a positive semidefinite matrix.
    #[error("unphysical state: minimum eigenvalue {} below tolerance", .0.min_eigenvalue)]
    Unphysical(Box<PhysicalityReport>),

    #[error("covariance not invertible after conditioning: eigenvalue {eigenvalue:e} ({reason})")]
    Covariance { eigenvalue: f64, reason: String },

    #[error("target {target} is not attainable for observable `{observable}`: {reason}")]
    Infeasible {
        observable: String,
        target: f64,
        reason: String,
    },

    #[error("optimizer did not converge after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    #[error("scan grid too narrow for `{observable}`: {detail}; widen the grid")]
    GridTooNarrow { observable: String, detail: String },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
