use thiserror::Error;

use crate::solver::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point ({x1}, {x2}) lies outside the grid rectangle")]
    OutsideGrid { x1: f64, x2: f64 },

    #[error("disk with center ({x1}, {x2}) and radius {r} does not fit inside the grid rectangle")]
    DiskOutsideGrid { x1: f64, x2: f64, r: f64 },

    #[error("invalid exponents p1 = {p1}, p2 = {p2}: need 2 <= p1 <= p2 < inf")]
    InvalidExponents { p1: f64, p2: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error(
        "solver did not converge: residual {residual:.3e} above tolerance after {iterations} iterations at eps = {eps:.1e}",
        residual = partial.report.final_residual,
        iterations = partial.report.total_iterations(),
        eps = partial.report.final_eps(),
    )]
    NotConverged { partial: Box<Solution> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
