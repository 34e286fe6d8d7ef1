use std::fmt;
use std::path::PathBuf;

use cccl_core::inventory::InventoryError;
use cccl_core::plot::PlotError;
use cccl_core::{PseudoError, SimilarityError, StatsError, StoreError};
use thiserror::Error;

use crate::provider::ProviderError;

/// What went wrong on one line of an input file.
#[derive(Debug, Error)]
pub enum FormatErrorKind {
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Syntax(String),
}

/// A malformed input file, located by 1-based line number.
#[derive(Debug, Error)]
pub struct FormatError {
    pub line: usize,
    pub kind: FormatErrorKind,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}

impl FormatError {
    pub fn new(line: usize, kind: impl Into<FormatErrorKind>) -> Self {
        Self {
            line,
            kind: kind.into(),
        }
    }

    pub fn syntax(line: usize, message: impl Into<String>) -> Self {
        Self::new(line, FormatErrorKind::Syntax(message.into()))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        source: Box<FormatError>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("inconsistent results: {0}")]
    Inconsistent(String),
    #[error("revision conflict: {0}")]
    RevisionConflict(InventoryError),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Pseudo(#[from] PseudoError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            source: Box::new(source),
        }
    }
}

impl Error {
    /// Process exit status: 2 input error, 3 missing embeddings, 4 revision
    /// conflict, 5 provider failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Similarity(SimilarityError::MissingEmbeddings(_)) => 3,
            Error::RevisionConflict(_) => 4,
            Error::Provider(_) => 5,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
