use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation failed at t = {t}: {what}")]
    Evaluation { t: f64, what: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The Galerkin index pair never stabilised. `spectrum` holds the
    /// generalized eigenvalues closest to zero at the last level tried.
    #[error("index did not stabilise up to level {max_level}")]
    NonConvergence { max_level: usize, spectrum: Vec<f64> },

    #[error("incompatible loops: {0}")]
    IncompatibleLoops(String),

    #[error("no nontrivial critical point found from {attempts} seeds")]
    NotFound { attempts: usize },

    #[error("degenerate loop: every Fourier mode is below threshold")]
    DegenerateLoop,

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
