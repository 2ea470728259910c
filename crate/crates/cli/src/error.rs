use std::path::PathBuf;

use thiserror::Error;
use vbvarsel::VbError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown table `{0}` (run `reproduce --list` for the available ones)")]
    UnknownTable(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: cannot parse {cell:?} as a number")]
    ParseError {
        line: usize,
        column: usize,
        cell: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {cell:?} is not a finite number")]
    NonNumericCell {
        line: usize,
        column: usize,
        cell: String,
    },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] VbError),
}

impl CliError {
    /// 1 for configuration problems, 2 for anything wrong with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::UnknownTable(_) => 1,
            Self::Model(
                VbError::InvalidHyperparameter { .. }
                | VbError::InvalidSchedule(_)
                | VbError::InvalidSpec(_)
                | VbError::NotPositiveDefinite(_),
            ) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
