//! Spreadsheet export in the SpreadsheetML 2003 dialect: one XML file, two
//! worksheets.
//!
//! "Data" has one row per entry: `row_index, captured_at, author, latitude,
//! longitude`, then the table's columns in schema order. "Notes" has one row
//! per annotation in feed order. Numbers are `ss:Type="Number"` in shortest
//! round-trip form, booleans `ss:Type="Boolean"` as 1/0, everything else
//! (timestamps included) `ss:Type="String"`. A missing value is an empty
//! `<Cell/>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::clock::format_timestamp;
use crate::model::{feed, Annotation, CellValue, Entry, FeedFilter, ModelError, TableDocument, TableId};
use crate::persistence::io::write_atomic;
use crate::store::{Store, StoreError};
use crate::xml::escape_text;

pub const DATA_SHEET: &str = "Data";
pub const NOTES_SHEET: &str = "Notes";
pub const DATA_PREFIX_COLUMNS: [&str; 5] = ["row_index", "captured_at", "author", "latitude", "longitude"];
pub const NOTES_COLUMNS: [&str; 12] = [
    "sequence",
    "effective_at",
    "captured_at",
    "author",
    "kind",
    "visibility",
    "scope_level",
    "row_index",
    "column_name",
    "latitude",
    "longitude",
    "text",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

enum Cell<'a> {
    Empty,
    Str(&'a str),
    Owned(String),
    Num(f64),
    Bool(bool),
}

/// Shortest decimal that reads back as the same f64, with an exponent for
/// very large or small magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn write_cell(out: &mut String, cell: Cell<'_>) {
    let (ty, text) = match cell {
        Cell::Empty => {
            out.push_str("<Cell/>");
            return;
        }
        Cell::Str(s) => ("String", escape_text(s)),
        Cell::Owned(s) => ("String", escape_text(&s)),
        Cell::Num(v) => ("Number", format_number(v)),
        Cell::Bool(b) => ("Boolean", if b { "1" } else { "0" }.to_owned()),
    };
    let _ = write!(out, "<Cell><Data ss:Type=\"{ty}\">{text}</Data></Cell>");
}

fn write_row<'a>(out: &mut String, cells: impl IntoIterator<Item = Cell<'a>>) {
    out.push_str("   <Row>");
    for c in cells {
        write_cell(out, c);
    }
    out.push_str("</Row>\n");
}

fn value_cell(v: Option<&CellValue>) -> Cell<'_> {
    match v {
        None => Cell::Empty,
        Some(CellValue::Text(s)) => Cell::Str(s),
        Some(CellValue::Number(n)) => Cell::Num(*n),
        Some(CellValue::Boolean(b)) => Cell::Bool(*b),
        Some(CellValue::Timestamp(t)) => Cell::Owned(format_timestamp(t)),
    }
}

fn coords(geo: Option<&crate::model::GeoTag>) -> [Cell<'static>; 2] {
    match geo.and_then(|g| g.coordinates()) {
        Some((lat, lon)) => [Cell::Num(lat), Cell::Num(lon)],
        None => [Cell::Empty, Cell::Empty],
    }
}

fn data_row(out: &mut String, doc: &TableDocument, e: &Entry) {
    let [lat, lon] = coords(e.geotag.as_ref());
    let prefix = [
        Cell::Num(e.row_index as f64),
        Cell::Owned(format_timestamp(&e.captured_at)),
        Cell::Str(&e.author),
        lat,
        lon,
    ];
    let values = doc.schema.columns.iter().map(|c| value_cell(e.values.get(&c.name)));
    write_row(out, prefix.into_iter().chain(values));
}

fn notes_row(out: &mut String, a: &Annotation) {
    let [lat, lon] = coords(a.geotag.as_ref());
    write_row(
        out,
        [
            Cell::Num(a.sequence as f64),
            Cell::Owned(format_timestamp(&a.effective_at)),
            Cell::Owned(format_timestamp(&a.captured_at)),
            Cell::Str(&a.author),
            Cell::Str(a.kind.as_str()),
            Cell::Str(a.visibility.as_str()),
            Cell::Str(a.scope.level().as_str()),
            a.scope.row_index().map_or(Cell::Empty, |r| Cell::Num(r as f64)),
            a.scope.column_name().map_or(Cell::Empty, Cell::Str),
            lat,
            lon,
            Cell::Str(&a.text),
        ],
    );
}

/// Render a workbook for one table. Deterministic.
pub fn to_spreadsheet(doc: &TableDocument) -> String {
    let mut out = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<?mso-application progid=\"Excel.Sheet\"?>\n",
        "<Workbook xmlns=\"urn:schemas-microsoft-com:office:spreadsheet\"",
        " xmlns:o=\"urn:schemas-microsoft-com:office:office\"",
        " xmlns:x=\"urn:schemas-microsoft-com:office:excel\"",
        " xmlns:ss=\"urn:schemas-microsoft-com:office:spreadsheet\"",
        " xmlns:html=\"http://www.w3.org/TR/REC-html40\">\n",
    ));
    let _ = writeln!(out, " <Worksheet ss:Name=\"{DATA_SHEET}\">\n  <Table>");
    let header = DATA_PREFIX_COLUMNS
        .iter()
        .map(|c| Cell::Str(c))
        .chain(doc.schema.columns.iter().map(|c| Cell::Str(&c.name)));
    write_row(&mut out, header);
    for e in &doc.entries {
        data_row(&mut out, doc, e);
    }
    out.push_str("  </Table>\n </Worksheet>\n");
    let _ = writeln!(out, " <Worksheet ss:Name=\"{NOTES_SHEET}\">\n  <Table>");
    write_row(&mut out, NOTES_COLUMNS.iter().map(|c| Cell::Str(c)));
    for a in feed(&doc.annotations, &FeedFilter::default()) {
        notes_row(&mut out, &a);
    }
    out.push_str("  </Table>\n </Worksheet>\n</Workbook>\n");
    out
}

/// Write the workbook for `table_id`. When `dest` is a directory, or ends in
/// a path separator, the file is named `<table_id>.export.xml` inside it.
pub fn export_spreadsheet(store: &Store, table_id: &TableId, dest: &Path) -> Result<PathBuf, ExportError> {
    let body = store.with_table(table_id, to_spreadsheet)?;
    let names_dir = dest.as_os_str().to_string_lossy().ends_with(std::path::MAIN_SEPARATOR);
    let path = if dest.is_dir() || names_dir {
        dest.join(format!("{table_id}.export.xml"))
    } else {
        dest.to_owned()
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| ExportError::Io {
            path: parent.to_owned(),
            source,
        })?;
    }
    write_atomic(&path, body.as_bytes(), None, false).map_err(|source| ExportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

impl From<ModelError> for ExportError {
    fn from(e: ModelError) -> Self {
        ExportError::Store(e.into())
    }
}
