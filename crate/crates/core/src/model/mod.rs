//! Tables, entries, annotations and the scopes that bind them together.

mod annotation;
pub mod clock;
mod feed;
mod geo;
mod ids;
mod scope;
mod sinks;
mod table;
mod value;

use thiserror::Error;

pub use annotation::{AnnotateOptions, Annotation, AnnotationKind, ResolvedOptions, Visibility};
pub use clock::{Clock, ManualClock, SystemClock};
pub use feed::{feed, feed_order, FeedFilter};
pub use geo::{GeoSource, GeoTag};
pub use ids::{AnnotationId, EntryId, IdGenerator, ItemId, TableId};
pub use scope::{resolve_scope, Resolved, Scope, ScopeLevel, ScopeNotFound};
pub use sinks::{Receipt, SinkId};
pub use table::{ColumnSpec, Entry, TableDocument, TableSchema};
pub use value::{CellValue, ValueType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("table title must not be empty")]
    EmptyTitle,
    #[error("column name must not be empty")]
    EmptyColumnName,
    #[error("duplicate column \"{column}\"")]
    DuplicateColumn { column: String },
    #[error("unknown table {0}")]
    UnknownTable(TableId),
    #[error("unknown column \"{column}\"")]
    UnknownColumn { column: String },
    #[error("column \"{column}\" expects {expected}, got \"{text}\"")]
    TypeMismatch {
        column: String,
        expected: ValueType,
        text: String,
    },
    #[error("annotation text must not be empty")]
    EmptyText,
    #[error("author must not be empty")]
    EmptyAuthor,
    #[error("{field} contains character U+{code:04X}, which cannot be stored")]
    UnstorableCharacter { field: String, code: u32 },
    #[error("scope unresolvable: {0}")]
    ScopeNotFound(ScopeNotFound),
    #[error("invalid geotag: {0}")]
    InvalidGeoTag(String),
    #[error("invalid sink selection: {0}")]
    InvalidSinks(String),
    #[error("invariant violated ({invariant}): {detail}")]
    Invariant { invariant: &'static str, detail: String },
}

impl ModelError {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        ModelError::Invariant {
            invariant,
            detail: detail.into(),
        }
    }
}

/// Reject characters XML 1.0 cannot carry even as character references.
pub(crate) fn check_xml_text(field: &str, s: &str) -> Result<(), ModelError> {
    match s.chars().find(|&c| !is_xml_char(c)) {
        Some(c) => Err(ModelError::UnstorableCharacter {
            field: field.to_owned(),
            code: c as u32,
        }),
        None => Ok(()),
    }
}

pub(crate) fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

pub(crate) fn check_author(author: &str) -> Result<(), ModelError> {
    if author.trim().is_empty() {
        return Err(ModelError::EmptyAuthor);
    }
    check_xml_text("author", author)
}

#[cfg(test)]
mod tests;
