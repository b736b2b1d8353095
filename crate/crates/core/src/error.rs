use thiserror::Error;

use crate::geometry::GeometryError;
use crate::numsolve::SolveError;

/// Errors raised by the market-level operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("operation requires {expected} demand")]
    DemandMode { expected: &'static str },
    #[error("mean scenario entry ({producer}, {period}) = {value} is outside [0, 1]")]
    BadMean { producer: usize, period: usize, value: f64 },
    #[error("{0} is infeasible")]
    Infeasible(&'static str),
    #[error("{0} is unbounded")]
    Unbounded(&'static str),
    #[error("saddle certificate failed: {0}")]
    SaddleViolated(String),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("producer {producer} deviates profitably in scenario {scenario} (capacity {deviation}, gain {gain})")]
    NotEquilibrium {
        producer: usize,
        scenario: usize,
        deviation: f64,
        gain: f64,
    },
    #[error("value-at-risk entries must be positive and alpha in (0, 1): {0}")]
    BadVar(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
