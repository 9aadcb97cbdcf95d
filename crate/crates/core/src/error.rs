use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity error: {needed} basis coordinates needed but only {available} available")]
    Capacity { needed: usize, available: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate shift: {0}")]
    Degenerate(String),

    #[error("Picard iteration is not contractive: max |lambda| = {max_abs} >= 1")]
    NonContractive { max_abs: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (last update {last_update:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        last_update: f64,
        residual: f64,
    },

    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
