//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by simulation, diagnostics, and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cost vector")]
    EmptyCosts,

    #[error("non-finite cost at index {index}")]
    NonFiniteCost { index: usize },

    #[error("alpha must be > 0, got {0}")]
    NonPositiveAlpha(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("non-finite state at step {step}: {detail}")]
    NonFiniteState { step: usize, detail: String },

    #[error("unknown cost function `{0}`")]
    UnknownCost(String),

    #[error("unknown parameter `{key}` for cost function `{cost}`")]
    UnknownCostParam { cost: String, key: String },

    #[error("trajectory grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Picard iteration did not converge after {iters} iterations (last defect {defect:.3e})")]
    PicardNoConvergence { iters: usize, defect: f64 },

    #[error("CFL condition violated: {0}")]
    CflViolation(String),

    #[error("finite-volume scheme produced mass {mass:.3e} in cell {cell}")]
    NegativeMass { cell: usize, mass: f64 },
}

impl Error {
    pub fn invalid_param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
