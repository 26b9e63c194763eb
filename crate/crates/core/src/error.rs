use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A kernel argument or parameter outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent sizes, missing keys, invalid flag combinations.
    #[error("configuration error: {0}")]
    Config(String),

    /// Estimation could not proceed on the supplied observations.
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// `I + S` is numerically singular.
    #[error("singular correlation matrix: smallest eigenvalue of I + S is {lambda_min:e}")]
    Singular { lambda_min: f64 },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular { .. } => 3,
            Error::Replicate { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
