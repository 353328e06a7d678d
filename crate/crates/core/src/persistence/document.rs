//! One XML file per table: schema, entries and annotations together.
//!
//! ```text
//! <table format-version="1" id=".." title=".." schema-version="N" created-by=".." created-at="..">
//!   <schema>
//!     <column name=".." type="text|number|boolean|timestamp" added-at-version="N"/>*
//!   </schema>
//!   <entries>
//!     <entry id=".." row="N" author=".." captured-at="..">
//!       <geotag source="device|manual_description" latitude?=".." longitude?="..">
//!         <description>..</description>?
//!       </geotag>?
//!       <value column="..">canonical text</value>*
//!     </entry>*
//!   </entries>
//!   <annotations>
//!     <annotation id=".." sequence="N" author=".." captured-at=".." effective-at=".."
//!                 kind=".." visibility="private|public">
//!       <scope level="table|row|column|cell" row?="N" column?=".."/>
//!       <geotag .../>?
//!       <sink id=".."/>*
//!       <text>..</text>
//!       <receipt sink=".." id=".." at=".."/>*
//!     </annotation>*
//!   </annotations>
//! </table>
//! ```
//!
//! The full description lives in `docs/formats.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};

use super::io::{write_atomic, WriteBudget};
use super::PersistenceError;
use crate::model::clock::{format_timestamp, parse_timestamp};
use crate::model::{
    Annotation, AnnotationId, ColumnSpec, Entry, EntryId, GeoSource, GeoTag, Receipt, Scope, ScopeLevel, SinkId,
    TableDocument, TableId, TableSchema, ValueType,
};
use crate::xml::{self, escape_text, Element, Tag};

pub const FORMAT_VERSION: u32 = 1;

pub fn document_file_name(table_id: &TableId) -> String {
    format!("{table_id}.xml")
}

fn write_geotag(out: &mut String, indent: &str, tag: &GeoTag) {
    let open = Tag::new("geotag")
        .attr("source", tag.source.as_str())
        .attr_opt("latitude", tag.latitude)
        .attr_opt("longitude", tag.longitude);
    match &tag.description {
        Some(desc) => {
            out.push_str(indent);
            out.push_str(&open.open());
            out.push_str("<description>");
            out.push_str(&escape_text(desc));
            out.push_str("</description></geotag>\n");
        }
        None => {
            out.push_str(indent);
            out.push_str(&open.empty());
            out.push('\n');
        }
    }
}

/// Render a document. Deterministic: equal documents give identical bytes.
pub fn to_xml(doc: &TableDocument) -> String {
    let s = &doc.schema;
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        &Tag::new("table")
            .attr("format-version", FORMAT_VERSION)
            .attr("id", &s.table_id)
            .attr("title", &s.title)
            .attr("schema-version", s.schema_version)
            .attr("created-by", &s.created_by)
            .attr("created-at", format_timestamp(&s.created_at))
            .open(),
    );
    out.push_str("\n  <schema>\n");
    for c in &s.columns {
        out.push_str("    ");
        out.push_str(
            &Tag::new("column")
                .attr("name", &c.name)
                .attr("type", c.value_type)
                .attr("added-at-version", c.added_at_version)
                .empty(),
        );
        out.push('\n');
    }
    out.push_str("  </schema>\n  <entries>\n");
    for e in &doc.entries {
        out.push_str("    ");
        out.push_str(
            &Tag::new("entry")
                .attr("id", &e.entry_id)
                .attr("row", e.row_index)
                .attr("author", &e.author)
                .attr("captured-at", format_timestamp(&e.captured_at))
                .open(),
        );
        out.push('\n');
        if let Some(tag) = &e.geotag {
            write_geotag(&mut out, "      ", tag);
        }
        for (column, value) in &e.values {
            out.push_str("      ");
            out.push_str(&Tag::new("value").attr("column", column).open());
            out.push_str(&escape_text(&value.to_string()));
            out.push_str("</value>\n");
        }
        out.push_str("    </entry>\n");
    }
    out.push_str("  </entries>\n  <annotations>\n");
    for a in &doc.annotations {
        out.push_str("    ");
        out.push_str(
            &Tag::new("annotation")
                .attr("id", &a.annotation_id)
                .attr("sequence", a.sequence)
                .attr("author", &a.author)
                .attr("captured-at", format_timestamp(&a.captured_at))
                .attr("effective-at", format_timestamp(&a.effective_at))
                .attr("kind", a.kind)
                .attr("visibility", a.visibility)
                .open(),
        );
        out.push_str("\n      ");
        out.push_str(
            &Tag::new("scope")
                .attr("level", a.scope.level().as_str())
                .attr_opt("row", a.scope.row_index())
                .attr_opt("column", a.scope.column_name())
                .empty(),
        );
        out.push('\n');
        if let Some(tag) = &a.geotag {
            write_geotag(&mut out, "      ", tag);
        }
        for sink in &a.extra_sinks {
            out.push_str("      ");
            out.push_str(&Tag::new("sink").attr("id", sink).empty());
            out.push('\n');
        }
        out.push_str("      <text>");
        out.push_str(&escape_text(&a.text));
        out.push_str("</text>\n");
        for r in &a.receipts {
            out.push_str("      ");
            out.push_str(
                &Tag::new("receipt")
                    .attr("sink", &r.sink)
                    .attr("id", &r.receipt_id)
                    .attr("at", format_timestamp(&r.at))
                    .empty(),
            );
            out.push('\n');
        }
        out.push_str("    </annotation>\n");
    }
    out.push_str("  </annotations>\n</table>\n");
    out
}

fn format_err(el: &Element, detail: impl Into<String>) -> PersistenceError {
    PersistenceError::Format {
        line: el.line,
        detail: detail.into(),
    }
}

fn required<'a>(el: &'a Element, key: &str) -> Result<&'a str, PersistenceError> {
    el.attr(key)
        .ok_or_else(|| format_err(el, format!("<{}> lacks attribute `{key}`", el.name)))
}

fn parsed<T: FromStr>(el: &Element, key: &str) -> Result<T, PersistenceError> {
    let raw = required(el, key)?;
    raw.parse()
        .map_err(|_| format_err(el, format!("<{}> attribute `{key}` has bad value \"{raw}\"", el.name)))
}

fn timestamp(el: &Element, key: &str) -> Result<DateTime<Utc>, PersistenceError> {
    let raw = required(el, key)?;
    parse_timestamp(raw).ok_or_else(|| {
        format_err(
            el,
            format!("<{}> attribute `{key}` is not ISO-8601: \"{raw}\"", el.name),
        )
    })
}

fn child<'a>(el: &'a Element, name: &str) -> Result<&'a Element, PersistenceError> {
    el.first(name)
        .ok_or_else(|| format_err(el, format!("<{}> lacks a <{name}> child", el.name)))
}

fn read_geotag(el: &Element) -> Result<GeoTag, PersistenceError> {
    let raw_source = required(el, "source")?;
    let source = GeoSource::parse(raw_source)
        .ok_or_else(|| format_err(el, format!("unknown geotag source \"{raw_source}\"")))?;
    let opt = |key: &str| -> Result<Option<f64>, PersistenceError> {
        el.attr(key).map(|_| parsed::<f64>(el, key)).transpose()
    };
    Ok(GeoTag {
        latitude: opt("latitude")?,
        longitude: opt("longitude")?,
        source,
        description: el.first("description").map(Element::text),
    })
}

fn read_scope(el: &Element, table_id: &TableId) -> Result<Scope, PersistenceError> {
    let raw_level = required(el, "level")?;
    let level =
        ScopeLevel::parse(raw_level).ok_or_else(|| format_err(el, format!("unknown scope level \"{raw_level}\"")))?;
    let row = || parsed::<u64>(el, "row");
    let column = || required(el, "column").map(str::to_owned);
    let extra = |key: &str| el.attr(key).is_some();
    let table_id = table_id.clone();
    let scope = match level {
        ScopeLevel::Table if !extra("row") && !extra("column") => Scope::Table { table_id },
        ScopeLevel::Row if !extra("column") => Scope::Row {
            table_id,
            row_index: row()?,
        },
        ScopeLevel::Column if !extra("row") => Scope::Column {
            table_id,
            column: column()?,
        },
        ScopeLevel::Cell => Scope::Cell {
            table_id,
            row_index: row()?,
            column: column()?,
        },
        _ => return Err(format_err(el, format!("{raw_level} scope carries fields it must not"))),
    };
    Ok(scope)
}

/// Parse and validate a document. Nothing partial is ever returned.
pub fn from_xml(src: &str) -> Result<TableDocument, PersistenceError> {
    let root = xml::parse(src)?;
    if root.name != "table" {
        return Err(format_err(
            &root,
            format!("root element is <{}>, expected <table>", root.name),
        ));
    }
    let version: u32 = parsed(&root, "format-version")?;
    if version != FORMAT_VERSION {
        return Err(format_err(&root, format!("unsupported format-version {version}")));
    }
    let table_id = TableId::new(required(&root, "id")?);

    let mut columns = Vec::new();
    for c in child(&root, "schema")?.elements_named("column") {
        let raw_type = required(c, "type")?;
        columns.push(ColumnSpec {
            name: required(c, "name")?.to_owned(),
            value_type: ValueType::from_str(raw_type).map_err(|e| format_err(c, e))?,
            added_at_version: parsed(c, "added-at-version")?,
        });
    }
    let schema = TableSchema {
        table_id: table_id.clone(),
        title: required(&root, "title")?.to_owned(),
        columns,
        schema_version: parsed(&root, "schema-version")?,
        created_by: required(&root, "created-by")?.to_owned(),
        created_at: timestamp(&root, "created-at")?,
    };
    let types: BTreeMap<&str, ValueType> = schema.columns.iter().map(|c| (c.name.as_str(), c.value_type)).collect();

    let mut entries = Vec::new();
    for e in child(&root, "entries")?.elements_named("entry") {
        let mut values = BTreeMap::new();
        for v in e.elements_named("value") {
            let column = required(v, "column")?;
            let value_type = types
                .get(column)
                .ok_or_else(|| format_err(v, format!("value for unknown column \"{column}\"")))?;
            let text = v.text();
            let value = value_type.parse(&text).ok_or_else(|| {
                format_err(
                    v,
                    format!("\"{text}\" is not a valid {value_type} for column \"{column}\""),
                )
            })?;
            if values.insert(column.to_owned(), value).is_some() {
                return Err(format_err(v, format!("column \"{column}\" given twice")));
            }
        }
        entries.push(Entry {
            entry_id: EntryId::new(required(e, "id")?),
            row_index: parsed(e, "row")?,
            values,
            author: required(e, "author")?.to_owned(),
            captured_at: timestamp(e, "captured-at")?,
            geotag: e.first("geotag").map(read_geotag).transpose()?,
        });
    }

    let mut annotations = Vec::new();
    for a in child(&root, "annotations")?.elements_named("annotation") {
        let extra_sinks: BTreeSet<SinkId> = a
            .elements_named("sink")
            .map(|s| required(s, "id").map(SinkId::from))
            .collect::<Result<_, _>>()?;
        let receipts = a
            .elements_named("receipt")
            .map(|r| {
                Ok(Receipt {
                    sink: SinkId::from(required(r, "sink")?),
                    receipt_id: required(r, "id")?.to_owned(),
                    at: timestamp(r, "at")?,
                })
            })
            .collect::<Result<Vec<_>, PersistenceError>>()?;
        annotations.push(Annotation {
            annotation_id: AnnotationId::new(required(a, "id")?),
            author: required(a, "author")?.to_owned(),
            captured_at: timestamp(a, "captured-at")?,
            effective_at: timestamp(a, "effective-at")?,
            text: child(a, "text")?.text(),
            geotag: a.first("geotag").map(read_geotag).transpose()?,
            kind: parsed(a, "kind")?,
            visibility: parsed(a, "visibility")?,
            extra_sinks,
            scope: read_scope(child(a, "scope")?, &table_id)?,
            sequence: parsed(a, "sequence")?,
            receipts,
        });
    }

    let doc = TableDocument {
        schema,
        entries,
        annotations,
    };
    doc.validate().map_err(PersistenceError::Invalid)?;
    Ok(doc)
}

/// Write `<table_id>.xml` under `dir`, atomically replacing any previous
/// version.
pub fn save_document(doc: &TableDocument, dir: &Path) -> Result<PathBuf, PersistenceError> {
    save_document_with(doc, dir, None, true)
}

pub(crate) fn save_document_with(
    doc: &TableDocument,
    dir: &Path,
    budget: Option<&WriteBudget>,
    sync: bool,
) -> Result<PathBuf, PersistenceError> {
    let path = dir.join(document_file_name(doc.table_id()));
    write_atomic(&path, to_xml(doc).as_bytes(), budget, sync).map_err(|source| PersistenceError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn load_document(path: &Path) -> Result<TableDocument, PersistenceError> {
    let src = fs::read_to_string(path).map_err(|source| PersistenceError::Io {
        path: path.to_owned(),
        source,
    })?;
    from_xml(&src).map_err(|e| e.at_path(path))
}
