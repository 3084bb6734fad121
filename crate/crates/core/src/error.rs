use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the discovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("size guard: {what} would have {count} entries (cap {cap})")]
    SizeGuard {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    #[error("optimizer aborted at iteration {iteration}: {reason}")]
    Optimizer { iteration: usize, reason: String },

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    #[error("triangulation failed: {0}")]
    Triangulation(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("newton iteration did not converge at step {step} (t = {t}), residual {residual:e}")]
    NewtonDivergence { step: usize, t: f64, residual: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid document: {0}")]
    Document(String),

    #[error("http: {0}")]
    Http(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
