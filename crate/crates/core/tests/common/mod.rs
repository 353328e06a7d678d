//! Generators and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use fieldlog_core::model::{
    Annotation, AnnotationId, AnnotationKind, CellValue, Entry, EntryId, GeoTag, Receipt, Scope, SinkId, TableDocument,
    TableId, TableSchema, ValueType, Visibility,
};
use quick_xml::events::Event;
use quick_xml::Reader;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2010, 6, 1, 0, 0, 0).unwrap()
}

const POOL: &[&str] = &[
    "a", "b", "z", "Q", " ", " ", "  ", "0", "7", ".", ",", "<", ">", "&", "\"", "'", "\t", "\n", "\r", "\r\n", "]]>",
    "&amp;", "é", "ß", "Ω", "ж", "水", "桜", "🌸", "🐝", "\u{200B}", "\u{FFFD}", "#", "_", "-",
];

/// Text mixing ASCII, markup characters, control whitespace and non-BMP
/// characters. Never contains characters XML cannot carry.
pub fn random_text(rng: &mut StdRng, max_pieces: usize) -> String {
    let n = rng.gen_range(0..=max_pieces);
    let mut s = String::new();
    for _ in 0..n {
        if rng.gen_bool(0.1) {
            // Any scalar from the XML-safe ranges.
            let c = loop {
                let c = match rng.gen_range(0..3) {
                    0 => rng.gen_range(0x20u32..0xD800),
                    1 => rng.gen_range(0xE000u32..0xFFFE),
                    _ => rng.gen_range(0x10000u32..0x110000),
                };
                if let Some(c) = char::from_u32(c) {
                    break c;
                }
            };
            s.push(c);
        } else {
            s.push_str(POOL.choose(rng).unwrap());
        }
    }
    s
}

pub fn non_blank_text(rng: &mut StdRng, max_pieces: usize) -> String {
    let s = random_text(rng, max_pieces);
    if s.trim().is_empty() {
        format!("{s}x")
    } else {
        s
    }
}

pub fn random_time(rng: &mut StdRng) -> DateTime<Utc> {
    let base = epoch() + Duration::seconds(rng.gen_range(0..86_400 * 30));
    match rng.gen_range(0..3) {
        0 => base,
        1 => base + Duration::milliseconds(rng.gen_range(0..1000)),
        _ => base + Duration::nanoseconds(rng.gen_range(0..1_000_000_000)),
    }
}

pub fn random_number(rng: &mut StdRng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-100.0..100.0),
        1 => rng.gen_range(-1000i64..1000) as f64,
        2 => rng.gen_range(-10.0..10.0f64) / 3.0,
        _ => loop {
            let v = f64::from_bits(rng.gen());
            if v.is_finite() {
                break v;
            }
        },
    }
}

pub fn random_value(rng: &mut StdRng, ty: ValueType) -> CellValue {
    match ty {
        ValueType::Text => CellValue::Text(random_text(rng, 12)),
        ValueType::Number => CellValue::Number(random_number(rng)),
        ValueType::Boolean => CellValue::Boolean(rng.gen()),
        ValueType::Timestamp => CellValue::Timestamp(random_time(rng)),
    }
}

pub fn random_geotag(rng: &mut StdRng) -> Option<GeoTag> {
    match rng.gen_range(0..4) {
        0 => Some(GeoTag::device(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0)).unwrap()),
        1 => Some(GeoTag::described(non_blank_text(rng, 6), None).unwrap()),
        2 => Some(
            GeoTag::described(
                non_blank_text(rng, 6),
                Some((rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0))),
            )
            .unwrap(),
        ),
        _ => None,
    }
}

const TYPES: [ValueType; 4] = [
    ValueType::Text,
    ValueType::Number,
    ValueType::Boolean,
    ValueType::Timestamp,
];

fn column_name(rng: &mut StdRng, i: usize) -> String {
    let stem = ["Nitrate", "pH", "temp °C", "σ<&>", "note", "水温", "depth m"]
        .choose(rng)
        .unwrap();
    format!("{stem} {i}")
}

/// A valid document: 0–8 columns (some added after creation), up to
/// `max_items` entries and annotations, every scope level represented when
/// rows and columns exist.
pub fn random_document(rng: &mut StdRng, max_items: usize) -> TableDocument {
    let id = TableId::new(format!("t{:08x}", rng.gen::<u32>()));
    let n_cols = rng.gen_range(0..=8);
    let initial = rng.gen_range(0..=n_cols);
    let cols: Vec<(String, ValueType)> = (0..initial)
        .map(|i| (column_name(rng, i), *TYPES.choose(rng).unwrap()))
        .collect();
    let schema = TableSchema::new(
        id.clone(),
        &non_blank_text(rng, 8),
        &cols,
        &non_blank_text(rng, 4),
        random_time(rng),
    )
    .unwrap();
    let mut doc = TableDocument::new(schema);
    for i in initial..n_cols {
        doc.add_column(&column_name(rng, i), *TYPES.choose(rng).unwrap())
            .unwrap();
    }
    let n_entries = rng.gen_range(0..=max_items);
    for i in 0..n_entries {
        let mut values: BTreeMap<String, CellValue> = BTreeMap::new();
        for c in &doc.schema.columns {
            if rng.gen_bool(0.7) {
                values.insert(c.name.clone(), random_value(rng, c.value_type));
            }
        }
        let entry = Entry {
            entry_id: EntryId::new(format!("e{i}-{:x}", rng.gen::<u32>())),
            row_index: doc.next_row_index(),
            values,
            author: non_blank_text(rng, 4),
            captured_at: random_time(rng),
            geotag: random_geotag(rng),
        };
        doc.push_entry(entry).unwrap();
    }
    let n_notes = rng.gen_range(0..=max_items);
    let mut seq = rng.gen_range(1..5u64);
    for i in 0..n_notes {
        let rows = doc.entries.len() as u64;
        let col = doc.schema.columns.choose(rng).map(|c| c.name.clone());
        let scope = match (rng.gen_range(0..4), rows, col) {
            (1, r, _) if r > 0 => Scope::row(id.clone(), rng.gen_range(1..=r)),
            (2, _, Some(c)) => Scope::column(id.clone(), c),
            (3, r, Some(c)) if r > 0 => Scope::cell(id.clone(), rng.gen_range(1..=r), c),
            _ => Scope::table(id.clone()),
        };
        let mut extra_sinks = BTreeSet::new();
        let visibility = if rng.gen_bool(0.3) {
            extra_sinks.insert(SinkId::PublicMicroblog);
            Visibility::Public
        } else {
            Visibility::Private
        };
        if rng.gen_bool(0.3) {
            extra_sinks.insert(SinkId::ContextRepo);
        }
        if rng.gen_bool(0.1) {
            extra_sinks.insert(SinkId::Other(format!("repo-{}", rng.gen_range(0..3))));
        }
        let captured_at = random_time(rng);
        let receipts = (0..rng.gen_range(0..3))
            .map(|k| Receipt {
                sink: SinkId::PrivateDb,
                receipt_id: format!("r{i}-{k}"),
                at: random_time(rng),
            })
            .collect();
        let annotation = Annotation {
            annotation_id: AnnotationId::new(format!("a{i}-{:x}", rng.gen::<u32>())),
            author: non_blank_text(rng, 4),
            captured_at,
            effective_at: if rng.gen_bool(0.5) {
                captured_at
            } else {
                random_time(rng)
            },
            text: {
                let max = if rng.gen_bool(0.05) { 3000 } else { 40 };
                non_blank_text(rng, max)
            },
            geotag: random_geotag(rng),
            kind: *[
                AnnotationKind::Note,
                AnnotationKind::Event,
                AnnotationKind::InstrumentFailure,
            ]
            .choose(rng)
            .unwrap(),
            visibility,
            extra_sinks,
            scope,
            sequence: seq,
            receipts,
        };
        seq += rng.gen_range(1..3);
        doc.push_annotation(annotation).unwrap();
    }
    doc
}

/// One parsed worksheet cell: `(ss:Type, text)`, or `None` for `<Cell/>`.
pub type SheetCell = Option<(String, String)>;

#[derive(Debug)]
pub struct Sheet {
    pub name: String,
    pub rows: Vec<Vec<SheetCell>>,
}

/// Read a SpreadsheetML workbook straight off quick-xml events.
pub fn parse_workbook(src: &str) -> Vec<Sheet> {
    let mut reader = Reader::from_str(src);
    reader.config_mut().trim_text(false);
    let mut sheets: Vec<Sheet> = Vec::new();
    let mut data_type: Option<String> = None;
    let mut text = String::new();
    loop {
        match reader.read_event().expect("well-formed workbook") {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"Worksheet" => {
                let name = e
                    .attributes()
                    .flatten()
                    .find(|a| a.key.as_ref() == b"ss:Name")
                    .map(|a| a.unescape_value().unwrap().into_owned())
                    .unwrap();
                sheets.push(Sheet { name, rows: Vec::new() });
            }
            Event::Start(e) if e.name().as_ref() == b"Row" => sheets.last_mut().unwrap().rows.push(Vec::new()),
            Event::Empty(e) if e.name().as_ref() == b"Cell" => {
                sheets.last_mut().unwrap().rows.last_mut().unwrap().push(None)
            }
            Event::Start(e) if e.name().as_ref() == b"Data" => {
                let ty = e
                    .attributes()
                    .flatten()
                    .find(|a| a.key.as_ref() == b"ss:Type")
                    .map(|a| a.unescape_value().unwrap().into_owned())
                    .unwrap();
                data_type = Some(ty);
                text.clear();
            }
            Event::Text(t) if data_type.is_some() => text.push_str(&t.unescape().unwrap()),
            Event::End(e) if e.name().as_ref() == b"Data" => {
                let ty = data_type.take().unwrap();
                let row = sheets.last_mut().unwrap().rows.last_mut().unwrap();
                row.push(Some((ty, std::mem::take(&mut text))));
            }
            Event::Eof => break,
            _ => {}
        }
    }
    sheets
}
