//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsacError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("grid coverage: {mass:.3e} probability mass in the outermost grid cells; widen ba.x_span")]
    GridCoverage { mass: f64 },

    #[error("mode error: {0}")]
    Mode(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl IsacError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        IsacError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, IsacError>;
