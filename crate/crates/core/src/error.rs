use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A numerical argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// No constellation attains the requested error exponent within the
    /// search range.
    #[error("infeasible: exponent {exponent} cannot be met ({reason})")]
    Infeasible { exponent: f64, reason: String },

    /// An iterative solver ran out of iterations.
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    /// Decision regions are inconsistent with each other or with a codebook.
    #[error("inconsistent decision regions: {0}")]
    Regions(String),

    /// A constellation or config file could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. } | Error::NoConvergence { .. } | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
