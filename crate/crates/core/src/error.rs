use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty ranked list")]
    EmptyList,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no convergence after {0} bisection steps")]
    NoConvergence(usize),
    #[error("pool `{pool}` too short: need {needed}, have {available}")]
    ShortPool {
        pool: String,
        needed: usize,
        available: usize,
    },
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("rank deficient design; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("missing coefficient `{0}`")]
    MissingCoefficient(String),
    #[error("missing fixture {}", .0.display())]
    MissingFixture(PathBuf),
    #[error("missing artifact `{0}`")]
    MissingArtifact(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyList => "empty_list",
            Error::Degenerate(_) => "degenerate",
            Error::NoConvergence(_) => "no_convergence",
            Error::ShortPool { .. } => "short_pool",
            Error::UnknownUser(_) => "unknown_user",
            Error::RankDeficient(_) => "rank_deficient",
            Error::MissingCoefficient(_) => "missing_coefficient",
            Error::MissingFixture(_) => "missing_fixture",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
