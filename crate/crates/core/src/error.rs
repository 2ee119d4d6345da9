use thiserror::Error;

use crate::state::DensityReport;

/// Errors raised by the state, dynamics, integration and optimization layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid density matrix: {0}")]
    InvalidDensity(DensityReport),

    #[error("Bloch vector norm {norm:e} lies outside the unit ball")]
    OutsideBlochBall { norm: f64 },

    #[error("incoherent control must be non-negative, got {0:e}")]
    NegativeIncoherentControl(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite state at t = {time:e}")]
    NonFiniteState { time: f64 },

    #[error("target not reached at T_hi = {t_hi}: J = {cost:e} exceeds the reach tolerance {reach_tol:e}")]
    InfeasibleAtTHi { t_hi: f64, cost: f64, reach_tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
