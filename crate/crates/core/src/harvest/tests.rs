use std::sync::Arc;

use chrono::{TimeZone, Utc};
use tempfile::TempDir;

use super::*;
use crate::model::clock::ManualClock;
use crate::model::{GeoSource, IdGenerator};
use crate::store::StoreOptions;

fn post(id: &str, text: &str, geo: Option<(f64, f64)>) -> PublicPost {
    PublicPost {
        post_id: id.into(),
        author: "obs".into(),
        posted_at: Utc.with_ymd_and_hms(2009, 4, 1, 8, 0, 0).unwrap(),
        geotag: geo.map(|(latitude, longitude)| Coordinates { latitude, longitude }),
        text: text.into(),
    }
}

#[test]
fn hashtag_matches_case_insensitively() {
    let spec = HarvestSpec::new(["#budburst"], Vec::<&str>::new(), false).unwrap();
    assert_eq!(
        spec.matched_terms("First bloom on the cherry tree! #budburst"),
        ["#budburst"]
    );
    assert_eq!(spec.matched_terms("#BudBurst today"), ["#budburst"]);
    assert!(spec.matched_terms("#budburst2009").is_empty());
    assert!(spec.matched_terms("budburst without a tag").is_empty());
    assert_eq!(spec.matched_terms("##budburst"), ["#budburst"]);
}

#[test]
fn keywords_are_whole_words() {
    let spec = HarvestSpec::new(Vec::<&str>::new(), ["spring", "bloom"], false).unwrap();
    assert!(spec.matched_terms("Springfield office closed").is_empty());
    assert_eq!(spec.matched_terms("Spring is here, full BLOOM."), ["bloom", "spring"]);
    assert!(spec.matched_terms("blooming").is_empty());
    assert_eq!(spec.matched_terms("#spring"), ["spring"]);
    assert!(spec.matched_terms("spring_break").is_empty());
}

#[test]
fn spec_validation() {
    assert!(matches!(
        HarvestSpec::new(Vec::<&str>::new(), Vec::<&str>::new(), false),
        Err(HarvestError::EmptySpec)
    ));
    assert!(matches!(
        HarvestSpec::new(["#two words"], Vec::<&str>::new(), false),
        Err(HarvestError::InvalidTerm(_))
    ));
    let spec = HarvestSpec::new(["BudBurst"], ["Bloom"], false).unwrap();
    assert!(spec.hashtags().contains("#budburst"));
    assert!(spec.keywords().contains("bloom"));
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<HarvestSpec>(&json).unwrap(), spec);
    assert!(serde_json::from_str::<HarvestSpec>("{}").is_err());
}

#[test]
fn harvest_keeps_order_and_filters_geotags() {
    let posts = vec![
        post("1", "bloom", None),
        post("2", "nothing", Some((1.0, 2.0))),
        post("3", "in bloom", Some((34.0, -118.0))),
    ];
    let spec = HarvestSpec::new(Vec::<&str>::new(), ["bloom"], false).unwrap();
    let ids: Vec<_> = harvest(&posts, &spec).into_iter().map(|o| o.post_id).collect();
    assert_eq!(ids, ["1", "3"]);
    let spec = HarvestSpec::new(Vec::<&str>::new(), ["bloom"], true).unwrap();
    let ids: Vec<_> = harvest(&posts, &spec).into_iter().map(|o| o.post_id).collect();
    assert_eq!(ids, ["3"]);
    assert!(harvest(&[], &spec).is_empty());
    assert_eq!(
        harvest_with(&posts, &spec, Execution::Sequential),
        harvest(&posts, &spec)
    );
}

#[test]
fn corpus_round_trip_and_errors() {
    let posts = vec![
        post("1", "bloom #budburst", Some((34.07, -118.44))),
        post("2", "späte Blüte", None),
    ];
    let text = write_corpus(&posts);
    assert_eq!(parse_corpus(&text).unwrap(), posts);
    assert_eq!(parse_corpus(&format!("\n{text}\r\n")).unwrap(), posts);
    let err = parse_corpus("a\tb\t2009-04-01T08:00:00Z\t\t\tx\ty").unwrap_err();
    assert!(
        err.to_string().contains("line 1") && err.to_string().contains("tab"),
        "{err}"
    );
    let err = parse_corpus("\n\na\tb\tnot-a-time\t\t\tx").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    assert!(parse_corpus("a\tb\t2009-04-01T08:00:00Z\t95\t0\tx").is_err());
    assert!(parse_corpus("a\tb\t2009-04-01T08:00:00Z\t1\t\tx").is_err());
    assert!(parse_corpus("a\tb\tc").is_err());
}

#[test]
fn import_dedups_by_post_id() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(
        StoreOptions::new(dir.path())
            .sync_writes(false)
            .clock(Arc::new(ManualClock::new(
                Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            )))
            .ids(Arc::new(IdGenerator::seeded(1))),
    )
    .unwrap();
    let t = create_harvest_table(&store, "budburst", "carol").unwrap().table_id;
    let spec = HarvestSpec::new(["budburst"], ["bloom"], false).unwrap();
    let posts = vec![
        post("p1", "#budburst", Some((34.07, -118.44))),
        post("p2", "bloom", None),
        post("p3", "in bloom", None),
    ];
    let obs = harvest(&posts, &spec);
    let first = harvest_to_table(&store, &t, &obs, "carol").unwrap();
    assert_eq!(first.skipped, 0);
    let rows: Vec<u64> = first.added.iter().map(|e| e.row_index).collect();
    assert_eq!(rows, [1, 2, 3]);
    let geo = first.added[0].geotag.as_ref().unwrap();
    assert_eq!(
        (geo.source, geo.coordinates()),
        (GeoSource::Device, Some((34.07, -118.44)))
    );
    assert_eq!(
        first.added[0].values["matched_terms"],
        CellValue::Text("#budburst".into())
    );

    let more = harvest(
        &[
            post("p3", "bloom", None),
            post("p4", "bloom", None),
            post("p4", "bloom", None),
        ],
        &spec,
    );
    let second = harvest_to_table(&store, &t, &more, "carol").unwrap();
    assert_eq!((second.added.len(), second.skipped), (1, 2));
    assert_eq!(store.table(&t).unwrap().entries.len(), 4);

    let plain = store.create_table("plain", &[], "carol").unwrap().table_id;
    assert!(matches!(
        harvest_to_table(&store, &plain, &obs, "carol"),
        Err(HarvestError::MissingColumn { column: "post_id", .. })
    ));
}
