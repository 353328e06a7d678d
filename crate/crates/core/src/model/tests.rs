use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;

use super::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2010, 6, 1, 10, 0, 0).unwrap()
}

fn water_quality() -> TableDocument {
    let schema = TableSchema::new(
        TableId::from("wq"),
        "water_quality",
        &[("Nitrate".to_owned(), ValueType::Number)],
        "alice",
        t0(),
    )
    .unwrap();
    TableDocument::new(schema)
}

fn entry(doc: &TableDocument, values: &[(&str, &str)]) -> Entry {
    let raw: BTreeMap<String, String> = values.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    Entry {
        entry_id: EntryId::new(format!("e{}", doc.next_row_index())),
        row_index: doc.next_row_index(),
        values: doc.parse_values(&raw).unwrap(),
        author: "alice".into(),
        captured_at: t0(),
        geotag: None,
    }
}

fn note(doc: &TableDocument, scope: Scope, effective_at: DateTime<Utc>) -> Annotation {
    let seq = doc.next_sequence();
    Annotation {
        annotation_id: AnnotationId::new(format!("a{seq}")),
        author: "alice".into(),
        captured_at: t0(),
        effective_at,
        text: "sensor drift suspected".into(),
        geotag: None,
        kind: AnnotationKind::Note,
        visibility: Visibility::Private,
        extra_sinks: Default::default(),
        scope,
        sequence: seq,
        receipts: vec![],
    }
}

#[test]
fn create_table_validates_title_and_columns() {
    let doc = water_quality();
    assert_eq!(doc.schema.schema_version, 1);
    assert_eq!(doc.schema.columns.len(), 1);
    assert_eq!(doc.schema.columns[0].added_at_version, 1);

    let empty = TableSchema::new(TableId::from("t"), "t", &[], "alice", t0()).unwrap();
    assert!(empty.columns.is_empty());

    let dup = TableSchema::new(
        TableId::from("t"),
        "t",
        &[("x".into(), ValueType::Text), ("x".into(), ValueType::Number)],
        "a",
        t0(),
    );
    assert_eq!(dup.unwrap_err(), ModelError::DuplicateColumn { column: "x".into() });
    assert_eq!(
        TableSchema::new(TableId::from("t"), "  ", &[], "a", t0()).unwrap_err(),
        ModelError::EmptyTitle
    );
}

#[test]
fn add_column_appends_and_bumps_version() {
    let mut doc = water_quality();
    doc.add_column("pH", ValueType::Number).unwrap();
    assert_eq!(doc.schema.schema_version, 2);
    let names: Vec<_> = doc.schema.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["Nitrate", "pH"]);
    assert_eq!(doc.schema.columns[1].added_at_version, 2);
    assert!(matches!(
        doc.add_column("pH", ValueType::Text),
        Err(ModelError::DuplicateColumn { .. })
    ));
    // Column names are case-sensitive.
    doc.add_column("ph", ValueType::Text).unwrap();
    doc.validate().unwrap();
}

#[test]
fn entries_predating_a_column_report_it_absent() {
    let mut doc = water_quality();
    for i in 0..100 {
        let e = entry(&doc, &[("Nitrate", &format!("{i}.5"))]);
        doc.push_entry(e).unwrap();
    }
    doc.add_column("pH", ValueType::Number).unwrap();
    assert!(doc.entries.iter().all(|e| !e.values.contains_key("pH")));
    match doc.resolve(&Scope::cell(TableId::from("wq"), 42, "pH")).unwrap() {
        Resolved::Cell { value, .. } => assert!(value.is_none()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn parse_values_reports_column_type_and_text() {
    let doc = water_quality();
    let raw = BTreeMap::from([("Nitrate".to_owned(), "abc".to_owned())]);
    assert_eq!(
        doc.parse_values(&raw).unwrap_err(),
        ModelError::TypeMismatch {
            column: "Nitrate".into(),
            expected: ValueType::Number,
            text: "abc".into()
        }
    );
    let raw = BTreeMap::from([("Phosphate".to_owned(), "1".to_owned())]);
    assert!(matches!(doc.parse_values(&raw), Err(ModelError::UnknownColumn { .. })));
    assert!(doc.parse_values(&BTreeMap::new()).unwrap().is_empty());
}

#[test]
fn row_indexes_are_dense() {
    let mut doc = water_quality();
    let first = entry(&doc, &[("Nitrate", "4.2")]);
    assert_eq!(first.row_index, 1);
    doc.push_entry(first).unwrap();
    let sparse = entry(&doc, &[]);
    assert_eq!(sparse.row_index, 2);
    doc.push_entry(sparse).unwrap();
    let mut skip = entry(&doc, &[]);
    skip.row_index = 7;
    assert!(doc.push_entry(skip).is_err());
}

#[test]
fn resolve_scope_at_every_level() {
    let mut doc = water_quality();
    for _ in 0..5 {
        let e = entry(&doc, &[("Nitrate", "1")]);
        doc.push_entry(e).unwrap();
    }
    let wq = TableId::from("wq");
    assert!(matches!(
        resolve_scope(&Scope::cell(wq.clone(), 3, "Nitrate"), &doc),
        Ok(Resolved::Cell { value: Some(CellValue::Number(v)), .. }) if *v == 1.0
    ));
    assert!(matches!(
        resolve_scope(&Scope::table(wq.clone()), &doc),
        Ok(Resolved::Table(_))
    ));
    assert!(matches!(resolve_scope(&Scope::row(wq.clone(), 5), &doc), Ok(Resolved::Row(e)) if e.row_index == 5));

    let missing = resolve_scope(&Scope::column(wq.clone(), "pH"), &doc).unwrap_err();
    assert_eq!(missing.missing_column.as_deref(), Some("pH"));
    assert_eq!(missing.to_string(), "column \"pH\" not found in table wq");

    let missing = resolve_scope(&Scope::cell(wq.clone(), 999, "pH"), &doc).unwrap_err();
    assert_eq!(missing.missing_row, Some(999));
    assert_eq!(missing.missing_column.as_deref(), Some("pH"));

    let other = resolve_scope(&Scope::table(TableId::from("other")), &doc).unwrap_err();
    assert!(other.missing_table);
    assert!(resolve_scope(&Scope::row(wq, 0), &doc).is_err());
}

#[test]
fn annotations_must_resolve_and_carry_text() {
    let mut doc = water_quality();
    let bad = note(&doc, Scope::row(TableId::from("wq"), 999), t0());
    assert!(matches!(doc.push_annotation(bad), Err(ModelError::ScopeNotFound(_))));

    let mut empty = note(&doc, Scope::table(TableId::from("wq")), t0());
    empty.text = " \n".into();
    assert_eq!(doc.push_annotation(empty), Err(ModelError::EmptyText));

    let mut nul = note(&doc, Scope::table(TableId::from("wq")), t0());
    nul.text = "a\u{0}b".into();
    assert!(matches!(
        doc.push_annotation(nul),
        Err(ModelError::UnstorableCharacter { code: 0, .. })
    ));

    let mut long = note(&doc, Scope::table(TableId::from("wq")), t0());
    long.text = "x".repeat(100_000);
    doc.push_annotation(long).unwrap();
}

#[test]
fn feed_orders_newest_first() {
    let mut doc = water_quality();
    for minutes in [0, 5, 2] {
        let a = note(
            &doc,
            Scope::table(TableId::from("wq")),
            t0() + Duration::minutes(minutes),
        );
        doc.push_annotation(a).unwrap();
    }
    let out = feed(&doc.annotations, &FeedFilter::default());
    let got: Vec<_> = out.iter().map(|a| (a.effective_at - t0()).num_minutes()).collect();
    assert_eq!(got, [5, 2, 0]);
    assert!(feed(std::iter::empty(), &FeedFilter::default()).is_empty());
}

#[test]
fn feed_filters_are_conjunctive() {
    let mut doc = water_quality();
    let wq = TableId::from("wq");
    let mut tagged = note(&doc, Scope::table(wq.clone()), t0());
    tagged.geotag = Some(GeoTag::device(34.07, -118.44).unwrap());
    doc.push_annotation(tagged).unwrap();
    let mut bob = note(&doc, Scope::table(wq.clone()), t0());
    bob.author = "bob".into();
    bob.kind = AnnotationKind::InstrumentFailure;
    doc.push_annotation(bob).unwrap();
    let plain = note(&doc, Scope::table(wq), t0() + Duration::hours(1));
    doc.push_annotation(plain).unwrap();

    let geo = feed(
        &doc.annotations,
        &FeedFilter {
            geotagged_only: true,
            ..Default::default()
        },
    );
    assert_eq!(geo.len(), 1);
    assert_eq!(geo[0].sequence, 1);

    let bob_failures = FeedFilter {
        kind: Some(AnnotationKind::InstrumentFailure),
        author: Some("bob".into()),
        ..Default::default()
    };
    assert_eq!(feed(&doc.annotations, &bob_failures).len(), 1);
    let bob_notes = FeedFilter {
        kind: Some(AnnotationKind::Note),
        author: Some("bob".into()),
        ..Default::default()
    };
    assert!(feed(&doc.annotations, &bob_notes).is_empty());

    let recent = FeedFilter {
        since: Some(t0() + Duration::minutes(30)),
        ..Default::default()
    };
    assert_eq!(feed(&doc.annotations, &recent).len(), 1);
}

#[test]
fn validate_catches_bad_versions_and_dangling_scopes() {
    let mut doc = water_quality();
    doc.add_column("pH", ValueType::Number).unwrap();
    doc.validate().unwrap();

    let mut skewed = doc.clone();
    skewed.schema.schema_version = 5;
    assert!(matches!(skewed.validate(), Err(ModelError::Invariant { .. })));

    let mut dangling = doc.clone();
    let a = note(&dangling, Scope::table(TableId::from("wq")), t0());
    dangling.annotations.push(Annotation {
        scope: Scope::row(TableId::from("wq"), 99),
        ..a
    });
    match dangling.validate() {
        Err(ModelError::Invariant { invariant, .. }) => assert_eq!(invariant, "scope resolvable"),
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #[test]
    fn feed_is_sorted_permutation(offsets in proptest::collection::vec(0i64..20, 0..60)) {
        // A 20-value range over up to 60 draws forces plenty of ties.
        let mut doc = water_quality();
        for off in &offsets {
            let a = note(&doc, Scope::table(TableId::from("wq")), t0() + Duration::seconds(*off));
            doc.push_annotation(a).unwrap();
        }
        let out = feed(&doc.annotations, &FeedFilter::default());
        prop_assert_eq!(out.len(), offsets.len());
        for pair in out.windows(2) {
            let key = |a: &Annotation| (a.effective_at, a.sequence);
            prop_assert!(key(&pair[0]) > key(&pair[1]));
        }
    }

    #[test]
    fn schema_versions_are_prefixes(adds in proptest::collection::vec("[a-z]{1,3}", 0..20)) {
        let mut doc = water_quality();
        let mut snapshots = vec![doc.schema.columns.clone()];
        for name in adds {
            if doc.add_column(&name, ValueType::Text).is_ok() {
                snapshots.push(doc.schema.columns.clone());
            }
        }
        for (v, cols) in snapshots.iter().enumerate() {
            prop_assert_eq!(doc.schema.columns_at(v as u32 + 1), cols.as_slice());
        }
        for pair in snapshots.windows(2) {
            prop_assert!(pair[1].starts_with(&pair[0]));
        }
        prop_assert_eq!(doc.schema.schema_version as usize, snapshots.len());
        doc.validate().unwrap();
    }
}
