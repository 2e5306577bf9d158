use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed JSON. `offset` is the byte offset of the failure in the input text.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A reference between records does not resolve, or an id is duplicated.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("value out of range: {0}")]
    Range(String),

    /// RLE runs do not cover the declared mask size.
    #[error("run-length error: runs sum to {actual}, expected {expected}")]
    Length { expected: u64, actual: u64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// A local distortion found no eligible object to act on.
    #[error("no eligible target for local distortion")]
    NoTarget,

    #[error("plan error: {0}")]
    Plan(String),

    /// A rate was requested against a zero baseline.
    #[error("undefined rate: baseline score is zero")]
    UndefinedRate,

    #[error("stats error: {0}")]
    Stats(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("codec error: {0}")]
    Codec(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(text: &str, err: &serde_json::Error) -> Self {
        Error::Parse {
            offset: byte_offset(text, err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

/// Converts serde_json's 1-based line/column into a byte offset into `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}
