use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::annotation::Annotation;
use super::geo::GeoTag;
use super::ids::{EntryId, TableId};
use super::scope::{resolve_scope, Resolved, Scope};
use super::value::{CellValue, ValueType};
use super::{check_author, check_xml_text, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub value_type: ValueType,
    /// Schema version that introduced this column; 1 for columns present at
    /// creation.
    pub added_at_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub table_id: TableId,
    pub title: String,
    pub columns: Vec<ColumnSpec>,
    pub schema_version: u32,
    pub created_by: String,
    pub created_at: DateTime<Utc>,
}

impl TableSchema {
    /// Validate and build a version-1 schema.
    pub fn new(
        table_id: TableId,
        title: &str,
        columns: &[(String, ValueType)],
        created_by: &str,
        created_at: DateTime<Utc>,
    ) -> Result<Self, ModelError> {
        if title.trim().is_empty() {
            return Err(ModelError::EmptyTitle);
        }
        check_xml_text("title", title)?;
        check_author(created_by)?;
        let mut seen = HashSet::new();
        for (name, _) in columns {
            check_column_name(name)?;
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateColumn { column: name.clone() });
            }
        }
        Ok(TableSchema {
            table_id,
            title: title.to_owned(),
            columns: columns
                .iter()
                .map(|(name, value_type)| ColumnSpec {
                    name: name.clone(),
                    value_type: *value_type,
                    added_at_version: 1,
                })
                .collect(),
            schema_version: 1,
            created_by: created_by.to_owned(),
            created_at,
        })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Columns as they stood at schema version `version`.
    pub fn columns_at(&self, version: u32) -> &[ColumnSpec] {
        let n = self
            .columns
            .iter()
            .take_while(|c| c.added_at_version <= version)
            .count();
        &self.columns[..n]
    }
}

fn check_column_name(name: &str) -> Result<(), ModelError> {
    if name.is_empty() {
        return Err(ModelError::EmptyColumnName);
    }
    check_xml_text("column name", name)
}

/// One data point. Values are sparse: a column the entry never set (including
/// any column added after the entry) is simply absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub entry_id: EntryId,
    pub row_index: u64,
    pub values: BTreeMap<String, CellValue>,
    pub author: String,
    pub captured_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geotag: Option<GeoTag>,
}

/// A table with its entries and every annotation bound to it. This is the
/// unit that gets persisted as one XML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub schema: TableSchema,
    pub entries: Vec<Entry>,
    pub annotations: Vec<Annotation>,
}

impl TableDocument {
    pub fn new(schema: TableSchema) -> Self {
        TableDocument {
            schema,
            entries: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn table_id(&self) -> &TableId {
        &self.schema.table_id
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.schema.column(name)
    }

    /// Entry by 1-based row index. Rows are dense, so this is a direct index.
    pub fn entry(&self, row_index: u64) -> Option<&Entry> {
        let i = usize::try_from(row_index).ok()?.checked_sub(1)?;
        self.entries.get(i)
    }

    pub fn entry_by_id(&self, id: &EntryId) -> Option<&Entry> {
        self.entries.iter().find(|e| &e.entry_id == id)
    }

    pub fn annotation_by_id(&self, id: &super::AnnotationId) -> Option<&Annotation> {
        self.annotations.iter().find(|a| &a.annotation_id == id)
    }

    pub fn next_row_index(&self) -> u64 {
        self.entries.len() as u64 + 1
    }

    pub fn next_sequence(&self) -> u64 {
        self.annotations.last().map_or(1, |a| a.sequence + 1)
    }

    /// Append a column, bumping the schema version.
    pub fn add_column(&mut self, name: &str, value_type: ValueType) -> Result<&ColumnSpec, ModelError> {
        check_column_name(name)?;
        if self.column(name).is_some() {
            return Err(ModelError::DuplicateColumn {
                column: name.to_owned(),
            });
        }
        self.schema.schema_version += 1;
        self.schema.columns.push(ColumnSpec {
            name: name.to_owned(),
            value_type,
            added_at_version: self.schema.schema_version,
        });
        Ok(self.schema.columns.last().unwrap())
    }

    /// Parse raw user text against the current schema.
    pub fn parse_values(&self, raw: &BTreeMap<String, String>) -> Result<BTreeMap<String, CellValue>, ModelError> {
        raw.iter()
            .map(|(name, text)| {
                let column = self
                    .column(name)
                    .ok_or_else(|| ModelError::UnknownColumn { column: name.clone() })?;
                let value = column.value_type.parse(text).ok_or_else(|| ModelError::TypeMismatch {
                    column: name.clone(),
                    expected: column.value_type,
                    text: text.clone(),
                })?;
                if let CellValue::Text(s) = &value {
                    check_xml_text(name, s)?;
                }
                Ok((name.clone(), value))
            })
            .collect()
    }

    /// Check already-typed values against the schema.
    pub fn check_values(&self, values: &BTreeMap<String, CellValue>) -> Result<(), ModelError> {
        for (name, value) in values {
            let column = self
                .column(name)
                .ok_or_else(|| ModelError::UnknownColumn { column: name.clone() })?;
            if value.value_type() != column.value_type {
                return Err(ModelError::TypeMismatch {
                    column: name.clone(),
                    expected: column.value_type,
                    text: value.to_string(),
                });
            }
            match value {
                CellValue::Number(v) if !v.is_finite() => {
                    return Err(ModelError::TypeMismatch {
                        column: name.clone(),
                        expected: column.value_type,
                        text: value.to_string(),
                    })
                }
                CellValue::Text(s) => check_xml_text(name, s)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn push_entry(&mut self, entry: Entry) -> Result<(), ModelError> {
        self.check_entry(&entry)?;
        self.entries.push(entry);
        Ok(())
    }

    /// Everything `push_entry` would reject, without modifying the document.
    pub fn check_entry(&self, entry: &Entry) -> Result<(), ModelError> {
        if entry.row_index != self.next_row_index() {
            return Err(ModelError::invariant(
                "dense row index",
                format!(
                    "entry row {} but next row is {}",
                    entry.row_index,
                    self.next_row_index()
                ),
            ));
        }
        if self.entry_by_id(&entry.entry_id).is_some() {
            return Err(ModelError::invariant("unique entry id", entry.entry_id.to_string()));
        }
        check_author(&entry.author)?;
        self.check_values(&entry.values)?;
        if let Some(tag) = &entry.geotag {
            tag.validate()?;
        }
        Ok(())
    }

    pub fn resolve(&self, scope: &Scope) -> Result<Resolved<'_>, ModelError> {
        resolve_scope(scope, self).map_err(ModelError::ScopeNotFound)
    }

    pub fn push_annotation(&mut self, annotation: Annotation) -> Result<(), ModelError> {
        self.check_annotation(&annotation)?;
        self.annotations.push(annotation);
        Ok(())
    }

    /// Everything `push_annotation` would reject, without modifying the
    /// document.
    pub fn check_annotation(&self, annotation: &Annotation) -> Result<(), ModelError> {
        annotation.validate()?;
        self.resolve(&annotation.scope)?;
        if annotation.sequence < self.next_sequence() {
            return Err(ModelError::invariant(
                "increasing annotation sequence",
                format!("sequence {} after {}", annotation.sequence, self.next_sequence() - 1),
            ));
        }
        if self.annotation_by_id(&annotation.annotation_id).is_some() {
            return Err(ModelError::invariant(
                "unique annotation id",
                annotation.annotation_id.to_string(),
            ));
        }
        Ok(())
    }

    /// Full consistency check, used when a document comes from outside
    /// (e.g. a file on disk).
    pub fn validate(&self) -> Result<(), ModelError> {
        let schema = &self.schema;
        if schema.title.trim().is_empty() {
            return Err(ModelError::EmptyTitle);
        }
        if schema.schema_version < 1 {
            return Err(ModelError::invariant(
                "schema version >= 1",
                schema.schema_version.to_string(),
            ));
        }
        let mut names = HashSet::new();
        let mut expected_later = 2;
        for column in &schema.columns {
            check_column_name(&column.name)?;
            if !names.insert(column.name.as_str()) {
                return Err(ModelError::DuplicateColumn {
                    column: column.name.clone(),
                });
            }
            match column.added_at_version {
                1 if expected_later == 2 => {}
                v if v == expected_later => expected_later += 1,
                v => {
                    return Err(ModelError::invariant(
                        "append-only column versions",
                        format!("column \"{}\" has version {v}", column.name),
                    ))
                }
            }
        }
        if schema.schema_version != expected_later - 1 {
            return Err(ModelError::invariant(
                "schema version = 1 + columns added after creation",
                format!(
                    "version {} with {} later columns",
                    schema.schema_version,
                    expected_later - 2
                ),
            ));
        }

        let mut rebuilt = TableDocument::new(schema.clone());
        for entry in &self.entries {
            rebuilt.push_entry(entry.clone())?;
        }
        for annotation in &self.annotations {
            if annotation.scope.table_id() != &schema.table_id {
                return Err(ModelError::invariant(
                    "scope resolvable",
                    format!("annotation {} is scoped to another table", annotation.annotation_id),
                ));
            }
            rebuilt.push_annotation(annotation.clone()).map_err(|e| match e {
                ModelError::ScopeNotFound(report) => ModelError::invariant(
                    "scope resolvable",
                    format!("annotation {}: {report}", annotation.annotation_id),
                ),
                other => other,
            })?;
        }
        Ok(())
    }
}
