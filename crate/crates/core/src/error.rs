use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("rotor stall: {0}")]
    Stall(String),

    #[error("non-finite state: {0}")]
    NonFinite(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("envelope construction failed: {0}")]
    Envelope(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("QP error: {0}")]
    Qp(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), msg: msg.into() }
    }
}
