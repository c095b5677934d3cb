use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid mask: row {row} has no unmasked entry")]
    InvalidMask { row: usize },

    #[error("invalid label {label} at index {index}: expected 0 or 1")]
    InvalidLabel { index: usize, label: u8 },

    #[error("non-finite value {value} at parameter index {index}")]
    Numeric { index: usize, value: f64 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid temporal offset {0}: must be finite and >= 0")]
    InvalidOffset(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("grouping error: {0}")]
    Grouping(String),

    #[error("test undefined: {0}")]
    UndefinedTest(String),

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension { op, left, right }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool.
    ///
    /// 2 usage/config, 3 I/O, 4 data or schema, 5 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 3,
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::Data(_)
            | Error::InsufficientData(_)
            | Error::InvalidSeries(_)
            | Error::InvalidLabel { .. }
            | Error::InvalidOffset(_)
            | Error::Grouping(_)
            | Error::UndefinedTest(_)
            | Error::UndefinedMetric(_)
            | Error::InvalidMask { .. }
            | Error::Dimension { .. } => 4,
            Error::Numeric { .. } | Error::GradCheck(_) => 5,
        }
    }
}
