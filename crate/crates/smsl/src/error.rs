use std::path::PathBuf;

use smsl_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: value {value} at row {row}, column {col} is outside [0, 1]")]
    Range {
        path: PathBuf,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    DataMismatch(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, e: &serde_json::Error) -> Self {
        Self::Json {
            path: path.into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }

    /// 0 ok, 1 usage/config/IO, 2 divergence, 3 data mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::DivergenceDetected { .. }) => 2,
            CliError::Core(
                CoreError::ShapeMismatch { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::IndexOutOfRange { .. },
            )
            | CliError::DataMismatch(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
