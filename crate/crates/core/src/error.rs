use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("ensemble must contain at least one bohmion")]
    EmptyEnsemble,

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("degenerate ensemble: mollifier sum underflows at every quadrature node")]
    DegenerateEnsemble,

    #[error("unsupported potential for exact spectral propagation: {0}")]
    UnsupportedPotential(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },

    #[error("loop sample {index} at ({x}, {y}) lies in a low-density region (D = {density:e})")]
    NodeOnLoop {
        index: usize,
        x: f64,
        y: f64,
        density: f64,
    },

    #[error("grid mismatch between fields")]
    GridMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
