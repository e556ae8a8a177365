use alloc::string::String;

/// Errors produced by the core data model, losses, metrics and trainer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("row {index} has zero norm")]
    ZeroRow { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    Range { row: usize, col: usize, value: f64 },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} is not unit-norm")]
    NotNormalized { row: usize },
    #[error("item {index} has an empty label set")]
    EmptyLabelSet { index: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("threshold {0} must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("hardest-negative mining requires a similarity matrix")]
    MissingSimilarity,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("ensemble needs at least one similarity matrix")]
    EmptyEnsemble,
    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    DivergenceDetected { epoch: usize, step: usize },
    #[error("malformed matrix data at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
