// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParcsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series has no variance")]
    NoVariance,

    #[error("negative count {value} at t={t}, covariate={covariate}")]
    NegativeCount {
        t: usize,
        covariate: usize,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario '{name}'; available presets: {available}")]
    UnknownScenario { name: String, available: String },

    #[error("infeasible block configuration: {0}")]
    InfeasibleBlocks(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl ParcsError {
    /// True for errors caused by user input or configuration rather than
    /// a failure inside the library.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, ParcsError::Internal(_) | ParcsError::Io(_))
    }
}

impl From<std::io::Error> for ParcsError {
    fn from(e: std::io::Error) -> Self {
        ParcsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ParcsError>;
