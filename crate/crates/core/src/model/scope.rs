use std::fmt;

use serde::{Deserialize, Serialize};

use super::ids::TableId;
use super::table::{ColumnSpec, Entry, TableDocument, TableSchema};
use super::value::CellValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeLevel {
    Table,
    Row,
    Column,
    Cell,
}

impl ScopeLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScopeLevel::Table => "table",
            ScopeLevel::Row => "row",
            ScopeLevel::Column => "column",
            ScopeLevel::Cell => "cell",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "table" => Some(ScopeLevel::Table),
            "row" => Some(ScopeLevel::Row),
            "column" => Some(ScopeLevel::Column),
            "cell" => Some(ScopeLevel::Cell),
            _ => None,
        }
    }
}

/// What an annotation is bound to. Each variant carries exactly the fields
/// its level needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum Scope {
    Table {
        table_id: TableId,
    },
    Row {
        table_id: TableId,
        row_index: u64,
    },
    Column {
        table_id: TableId,
        column: String,
    },
    Cell {
        table_id: TableId,
        row_index: u64,
        column: String,
    },
}

impl Scope {
    pub fn table(table_id: TableId) -> Self {
        Scope::Table { table_id }
    }

    pub fn row(table_id: TableId, row_index: u64) -> Self {
        Scope::Row { table_id, row_index }
    }

    pub fn column(table_id: TableId, column: impl Into<String>) -> Self {
        Scope::Column {
            table_id,
            column: column.into(),
        }
    }

    pub fn cell(table_id: TableId, row_index: u64, column: impl Into<String>) -> Self {
        Scope::Cell {
            table_id,
            row_index,
            column: column.into(),
        }
    }

    /// Build from optional row/column parts, picking the level they imply.
    pub fn from_parts(table_id: TableId, row_index: Option<u64>, column: Option<String>) -> Self {
        match (row_index, column) {
            (None, None) => Scope::Table { table_id },
            (Some(row_index), None) => Scope::Row { table_id, row_index },
            (None, Some(column)) => Scope::Column { table_id, column },
            (Some(row_index), Some(column)) => Scope::Cell {
                table_id,
                row_index,
                column,
            },
        }
    }

    pub fn level(&self) -> ScopeLevel {
        match self {
            Scope::Table { .. } => ScopeLevel::Table,
            Scope::Row { .. } => ScopeLevel::Row,
            Scope::Column { .. } => ScopeLevel::Column,
            Scope::Cell { .. } => ScopeLevel::Cell,
        }
    }

    pub fn table_id(&self) -> &TableId {
        match self {
            Scope::Table { table_id }
            | Scope::Row { table_id, .. }
            | Scope::Column { table_id, .. }
            | Scope::Cell { table_id, .. } => table_id,
        }
    }

    pub fn row_index(&self) -> Option<u64> {
        match self {
            Scope::Row { row_index, .. } | Scope::Cell { row_index, .. } => Some(*row_index),
            _ => None,
        }
    }

    pub fn column_name(&self) -> Option<&str> {
        match self {
            Scope::Column { column, .. } | Scope::Cell { column, .. } => Some(column),
            _ => None,
        }
    }
}

/// The thing a scope points at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolved<'a> {
    Table(&'a TableSchema),
    Row(&'a Entry),
    Column(&'a ColumnSpec),
    Cell {
        entry: &'a Entry,
        column: &'a ColumnSpec,
        /// `None` when the entry predates the column or left it blank.
        value: Option<&'a CellValue>,
    },
}

/// Structured report of what a scope failed to find.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeNotFound {
    pub table_id: TableId,
    pub missing_table: bool,
    pub missing_row: Option<u64>,
    pub missing_column: Option<String>,
}

impl fmt::Display for ScopeNotFound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.missing_table {
            return write!(f, "table {} not found", self.table_id);
        }
        let mut parts = Vec::new();
        if let Some(row) = self.missing_row {
            parts.push(format!("row {row}"));
        }
        if let Some(column) = &self.missing_column {
            parts.push(format!("column \"{column}\""));
        }
        write!(f, "{} not found in table {}", parts.join(" and "), self.table_id)
    }
}

/// Resolve `scope` against `document`. Total: every failure is reported as a
/// [`ScopeNotFound`].
pub fn resolve_scope<'a>(scope: &Scope, document: &'a TableDocument) -> Result<Resolved<'a>, ScopeNotFound> {
    let mut report = ScopeNotFound {
        table_id: scope.table_id().clone(),
        missing_table: false,
        missing_row: None,
        missing_column: None,
    };
    if scope.table_id() != &document.schema.table_id {
        report.missing_table = true;
        return Err(report);
    }
    let entry = scope.row_index().map(|row| (row, document.entry(row)));
    let column = scope.column_name().map(|name| (name, document.column(name)));
    if let Some((row, None)) = entry {
        report.missing_row = Some(row);
    }
    if let Some((name, None)) = column {
        report.missing_column = Some(name.to_owned());
    }
    if report.missing_row.is_some() || report.missing_column.is_some() {
        return Err(report);
    }
    let entry = entry.and_then(|(_, e)| e);
    let column = column.and_then(|(_, c)| c);
    Ok(match (entry, column) {
        (None, None) => Resolved::Table(&document.schema),
        (Some(entry), None) => Resolved::Row(entry),
        (None, Some(column)) => Resolved::Column(column),
        (Some(entry), Some(column)) => Resolved::Cell {
            entry,
            column,
            value: entry.values.get(&column.name),
        },
    })
}
