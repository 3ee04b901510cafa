use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CrispError>;

#[derive(Debug, Error)]
pub enum CrispError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("no positive labels in any instance")]
    NoPositiveLabels,

    #[error("no observed positives for label {label}")]
    NoObservedPositives { label: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CrispError {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        CrispError::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for failures caused by the content of the data rather than by
    /// how the tool was invoked.
    pub fn is_data_condition(&self) -> bool {
        matches!(
            self,
            CrispError::NoObservedPositives { .. }
                | CrispError::NoPositiveLabels
                | CrispError::EmptySplit(_)
                | CrispError::UndefinedMetric(_)
        )
    }
}
