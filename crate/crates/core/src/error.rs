use crate::grid::Grid2D;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: Grid2D, right: Grid2D },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("eigen index ({m1}, {m2}) out of range for grid {grid}")]
    IndexOutOfRange { m1: usize, m2: usize, grid: Grid2D },

    #[error(
        "shifted operator {c1}*A + {c0}*E is not positive definite (c1*delta + c0 = {margin:e})"
    )]
    Indefinite { c1: f64, c0: f64, margin: f64 },

    #[error(
        "{solver} did not converge in {iterations} iterations (relative residual {residual:e})"
    )]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("CG breakdown at iteration {iteration}: (Ap, p) = {curvature:e}, operator is not positive definite")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("point ({x1}, {x2}) lies outside the domain [0, {d}] x [0, 1]")]
    OutsideDomain { x1: f64, x2: f64, d: f64 },

    #[error("profile line {line}: {message}")]
    Profile { line: u64, message: String },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
