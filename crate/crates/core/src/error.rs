use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid fractional order {name} = {value} (expected 1/2 < order < 1)")]
    InvalidOrder { name: &'static str, value: f64 },

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("nonconforming mesh: {0}")]
    NonconformingMesh(String),

    #[error("degenerate integral path at ({x}, {y}): {msg}")]
    DegeneratePath { x: f64, y: f64, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported quadrature degree {0} (supported: 1..=5)")]
    UnsupportedDegree(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("quadrature did not converge: {0}")]
    NonConvergentQuadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FemError> = std::result::Result<T, E>;
