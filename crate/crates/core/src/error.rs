use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no observation carries positive kernel weight at x = {x:?}")]
    EmptyNeighborhood { x: Vec<f64> },

    #[error("degenerate point: all responses in the neighborhood equal y = {y}")]
    DegeneratePoint { y: f64 },

    #[error("expectile at level {alpha} is {value}, logarithm undefined")]
    NonPositiveExpectile { alpha: f64, value: f64 },

    #[error("tail moment of order {k} does not exist for tail index {gamma} (need k * gamma < 1)")]
    MomentNonexistence { k: f64, gamma: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bisection did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("selection failed: {0}")]
    SelectionFailure(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case identifier, suitable for status columns.
    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidArgument(_) => "invalid_argument",
            Self::EmptyNeighborhood { .. } => "empty_neighborhood",
            Self::DegeneratePoint { .. } => "degenerate_point",
            Self::NonPositiveExpectile { .. } => "non_positive_expectile",
            Self::MomentNonexistence { .. } => "moment_nonexistence",
            Self::Domain(_) => "domain",
            Self::NoConvergence { .. } => "no_convergence",
            Self::SelectionFailure(_) => "selection_failure",
            Self::OracleFailure(_) => "oracle_failure",
            Self::Io { .. } => "io",
            Self::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
