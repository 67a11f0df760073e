//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (unknown domain tag, bad degree, negative level, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Assembly produced an inconsistent object (signals a basis or mesh bug).
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Power iteration failed to settle within its iteration budget.
    #[error("spectral estimate did not converge: {0}")]
    SpectralEstimate(String),

    /// Iterative solve exhausted its cycle budget; carries the residual history.
    #[error("solver did not reach tolerance {tol:e} in {cycles} cycles (last residual {last:e})")]
    NoConvergence {
        tol: f64,
        cycles: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
