use thiserror::Error;

/// Errors raised by field construction, reconstruction and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("index ({row}, {col}) out of bounds for {rows}x{cols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("duplicate sample position ({row}, {col})")]
    DuplicatePosition { row: usize, col: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{solver} did not converge after {iterations} iterations (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("malformed {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Singular(_) | Error::NotConverged { .. } | Error::Degenerate(_)
        )
    }
}
