use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("scan {index} at ({center_x}, {center_y}) um is clipped by the sampling window")]
    WindowTooSmall {
        index: usize,
        center_x: f64,
        center_y: f64,
    },

    #[error("z = {z} um lies outside the taper [0, {length}] um")]
    OutOfRange { z: f64, length: f64 },

    #[error("eigen iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite at row {row}")]
    NotPositiveDefinite { row: usize },

    #[error("step dz = {dz} um violates the stepping limit: {reason}")]
    Stability { dz: f64, reason: String },

    #[error("guide supports {count} guided modes, expected a single-mode guide")]
    Multimode { count: usize },

    #[error("no guided mode found")]
    NoGuidedMode,

    #[error("frame dimensions {found:?} differ from {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("least-squares fit failed: {reason}")]
    FitFailed {
        reason: String,
        last_params: Vec<f64>,
    },

    #[error("decohered generation {generation}: quadrature power {power:e} below floor {floor:e}")]
    Decohered {
        generation: usize,
        power: f64,
        floor: f64,
        trace: Vec<crate::sensor::Generation>,
    },

    #[error("equilibrium search did not converge after {iterations} iterations (|grad| = {gradient:e})")]
    Equilibrium { iterations: usize, gradient: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
