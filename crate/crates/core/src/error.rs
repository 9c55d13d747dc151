use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} values, got {got}")]
    Length { needed: usize, got: usize },

    #[error("date range {start}..={end} outside series coverage {cover_start}..={cover_end}")]
    Range {
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
        cover_start: chrono::NaiveDate,
        cover_end: chrono::NaiveDate,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("snapshot coverage insufficient: needs data through {needed}, have through {have}")]
    Coverage {
        needed: chrono::NaiveDate,
        have: chrono::NaiveDate,
    },

    #[error("singular regression: {0}")]
    Singular(String),

    #[error("length mismatch: {left} vs {right}")]
    Mismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("model is not converged")]
    NotConverged,

    #[error("model is untrained")]
    Untrained,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no valid results: {0}")]
    NoValidResults(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("http error: {0}")]
    Http(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
