use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("gradient estimation failed: non-finite objective value at probe along coordinate {coordinate:?}")]
    Estimation {
        /// `None` when the base point itself evaluated to a non-finite value.
        coordinate: Option<usize>,
    },

    #[error("divergence at iteration {iteration}: particle {particle} left the finite range")]
    Divergence { iteration: usize, particle: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("indicator set is empty: no particle within radius {radius} of the minimizer")]
    EmptyIndicator { radius: f64 },

    #[error("unknown benchmark `{name}`; available: {available}")]
    UnknownBenchmark { name: String, available: String },

    #[error("shape mismatch: expected {expected} parameters, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
