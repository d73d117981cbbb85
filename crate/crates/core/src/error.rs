use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VortexError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    NonConvergent {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("segment quadrature of order {order} disagrees with order {doubled} by {discrepancy:e} (tolerance {tolerance:e})")]
    QuadratureOrderTooLow {
        order: usize,
        doubled: usize,
        discrepancy: f64,
        tolerance: f64,
    },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("refinement needs {needed} points, cap is {cap}")]
    MaxPointsExceeded { needed: usize, cap: usize },

    #[error("lattice cutoff {cutoff} discards a tail fraction {fraction:e} (allowed {allowed:e})")]
    CutoffTooSmall {
        cutoff: i32,
        fraction: f64,
        allowed: f64,
    },

    #[error("energy {energy:e} exceeded ceiling {ceiling:e} at t = {t}")]
    EnergyCeilingExceeded { t: f64, energy: f64, ceiling: f64 },

    #[error("{what}, line {line}: {reason}")]
    Malformed {
        what: String,
        line: usize,
        reason: String,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl VortexError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        VortexError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, err: std::io::Error) -> VortexError {
    VortexError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

pub type Result<T> = std::result::Result<T, VortexError>;
