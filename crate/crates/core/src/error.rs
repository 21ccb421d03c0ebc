use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature did not converge (achieved {achieved:.3e}, requested {requested:.3e})")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    /// The iteration blew up; the per-iteration noise variances are attached
    /// so callers can diagnose what happened.
    #[error("gamp diverged after {iterations} iterations")]
    GampDivergence {
        iterations: usize,
        mu_trajectory: Vec<f64>,
    },

    #[error("channel unsupported: {0}")]
    ChannelUnsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
