//! Error type shared by every stage of the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Missing or unknown columns in an input header.
    #[error("bad header: {0}")]
    Header(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data for {what}: need at least {needed}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// A statistic that has no defined value for the given input.
    #[error("undefined: {0}")]
    Undefined(String),

    /// Model parameters outside the stationary/invertible region.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("optimizer did not converge after {evaluations} evaluations (best objective {best_objective}, params {best_params:?})")]
    NonConvergence {
        evaluations: usize,
        best_objective: f64,
        best_params: Vec<f64>,
    },

    #[error("regressor '{0}' has zero variance")]
    ZeroVarianceRegressor(String),

    #[error("regressors '{0}' and '{1}' are collinear")]
    CollinearRegressors(String, String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
