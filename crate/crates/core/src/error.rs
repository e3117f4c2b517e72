use thiserror::Error;

use crate::newton::History;

pub type Result<T> = std::result::Result<T, VortexError>;

#[derive(Debug, Error)]
pub enum VortexError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: expected {expected} components, got {got}")]
    Shape { expected: usize, got: usize },

    /// The periodic Poisson problem has no solution unless the source has zero mean.
    #[error("right-hand side has mean {mean:e} (max |rhs| = {max_abs:e}); no periodic solution exists")]
    Solvability { mean: f64, max_abs: f64 },

    #[error("existence condition violated: {0}")]
    GateRefused(String),

    #[error("diverging iterate: exponent {exponent:e} overflows; retry with a smaller step")]
    Diverging { exponent: f64 },

    #[error("no convergence after {iterations} outer iterations (gradient norm {grad_norm:e}, residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        residual: f64,
        history: Box<History>,
    },

    #[error("line search failed at iteration {iteration}: no decrease for step >= {min_step:e}")]
    LineSearch { iteration: usize, min_step: f64 },

    #[error("decay window [{r1}, {r2}] is underflow-dominated (min sample {min_value:e}); move the window inward")]
    Underflow { r1: f64, r2: f64, min_value: f64 },

    #[error("wrong domain: {0}")]
    WrongDomain(String),

    #[error("result has not converged")]
    NotConverged,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
