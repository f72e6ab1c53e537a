use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-domain input values.
    #[error("invalid input: {0}")]
    Input(String),

    /// A selection violated the no-repeat rule or ran out of candidates.
    #[error("selection error: {0}")]
    Selection(String),

    /// An operation was attempted on a state that cannot support it.
    #[error("state error: {0}")]
    State(String),

    /// Cholesky factorization failed even at the largest jitter.
    #[error("numerical error: {message} (n = {size}, max jitter = {jitter:e}, smallest pivot = {min_pivot:e})")]
    Numerical {
        message: String,
        size: usize,
        jitter: f64,
        min_pivot: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// Schema validation failure; every offending field is listed.
    #[error("schema error in fields: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
