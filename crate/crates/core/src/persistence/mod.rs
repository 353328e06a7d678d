//! Durable storage: per-table XML documents plus a shared write-ahead journal.

pub mod document;
pub mod io;
pub mod journal;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use document::{from_xml, load_document, save_document, to_xml};
pub use io::WriteBudget;
pub use journal::{Journal, JournalOp, JournalOptions, JournalRecord, OpKind, Replay, ReplayEnd};

use crate::model::ModelError;
use crate::xml::XmlError;

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}malformed XML at {error}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, error: XmlError },
    #[error("line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error("document fails validation: {0}")]
    Invalid(ModelError),
    #[error("{}: corrupt record at byte {offset} (last good record_seq {last_good_seq:?}): {reason}", path.display())]
    JournalCorrupt {
        path: PathBuf,
        offset: u64,
        last_good_seq: Option<u64>,
        reason: String,
    },
    #[error("encoding: {0}")]
    Codec(#[from] serde_json::Error),
    #[error("storage is unusable after an earlier write failure")]
    Poisoned,
}

impl From<XmlError> for PersistenceError {
    fn from(error: XmlError) -> Self {
        PersistenceError::Parse { path: None, error }
    }
}

impl PersistenceError {
    pub(crate) fn at_path(self, p: &Path) -> Self {
        match self {
            PersistenceError::Parse { error, .. } => PersistenceError::Parse {
                path: Some(p.to_owned()),
                error,
            },
            other => other,
        }
    }
}
