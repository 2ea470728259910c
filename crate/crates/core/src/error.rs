use thiserror::Error;

/// Errors raised by the model, schedule, engine, and generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VbError {
    #[error("data matrix must have at least 2 rows and 1 column (got {rows}x{cols})")]
    InvalidShape { rows: usize, cols: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),
    #[error("column name count {got} does not match column count {expected}")]
    ColumnNameMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperparameter { name: &'static str, reason: String },
    #[error("invalid temperature schedule: {0}")]
    InvalidSchedule(String),
    #[error("ELBO term `{term}` is not finite")]
    NonFiniteElbo { term: &'static str },
    #[error("all responsibilities in row {0} underflowed")]
    NumericalUnderflow(usize),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("covariance structure is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("column index {index} out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
}

pub type Result<T, E = VbError> = std::result::Result<T, E>;
