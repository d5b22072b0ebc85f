use std::path::PathBuf;

use thiserror::Error;

use crate::trace::SymbolId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-monotone timestamp at line {line}")]
    NonMonotoneTime { line: usize },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("duplicate timestamp {t} at sample {index}")]
    DuplicateTimestamp { index: usize, t: f64 },

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("trace file not found: {}", .0.display())]
    DanglingPath(PathBuf),

    #[error("duplicate entry for child {child_id:?}, symbol {symbol}")]
    DuplicateEntry { child_id: String, symbol: SymbolId },

    #[error("length mismatch: {left} vs {right} points")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid structuring element width {0} (must be odd and >= 3)")]
    InvalidWidth(usize),

    #[error("no reference support for symbol {symbol} near age {age_months} months")]
    UnsupportedReference { symbol: SymbolId, age_months: u32 },

    #[error("invalid reference table: {0}")]
    Reference(String),

    #[error("invalid generator spec: {0}")]
    Generator(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
