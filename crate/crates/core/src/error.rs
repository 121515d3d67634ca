use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected {expected} columns, found {found}")]
    MalformedLine {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
    #[error("line {line}: label must be 0 or 1, found `{found}`")]
    NonBinaryLabel { line: usize, found: String },
    #[error("line {line}: missing column")]
    MissingColumn { line: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("overlapping spans [{0}, {1}) and [{2}, {3})")]
    OverlappingSpans(usize, usize, usize, usize),
    #[error("invalid span [{start}, {end}) for sentence of length {len}")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: duplicate token `{token}`")]
    DuplicateToken { line: usize, token: String },
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("sentence {sentence}: expected {expected} vectors, found {found}")]
    Alignment {
        sentence: usize,
        expected: usize,
        found: usize,
    },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checksum mismatch for {0}")]
    Checksum(PathBuf),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::NonFiniteLoss { .. } | Error::Io(_) => ErrorKind::Runtime,
            Error::Fold { source, .. } | Error::File { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Attach the file the error was raised for.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
