use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn fieldlog(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldlog"))
        .args(args)
        .env("FIELDLOG_DATA_DIR", dir)
        .env("FIELDLOG_AUTHOR", "ana")
        .env_remove("FIELDLOG_CONFIG")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fieldlog(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn seed(dir: &Path) {
    ok(
        dir,
        &[
            "table",
            "create",
            "--title",
            "water_quality",
            "--column",
            "Nitrate:number",
        ],
    );
    for v in ["1.1", "1.2", "1.3"] {
        ok(
            dir,
            &[
                "entry",
                "add",
                "--table",
                "water_quality",
                "--value",
                &format!("Nitrate={v}"),
            ],
        );
    }
}

#[test]
fn note_on_a_cell_prints_its_id() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    let out = ok(
        dir.path(),
        &[
            "note",
            "add",
            "--table",
            "water_quality",
            "--row",
            "3",
            "--column",
            "Nitrate",
            "--text",
            "sensor drift suspected",
        ],
    );
    let id = out.trim();
    assert!(id.starts_with('a') && !id.contains(char::is_whitespace), "{out:?}");
    let shown = ok(dir.path(), &["table", "show", "water_quality", "--json"]);
    let doc: serde_json::Value = serde_json::from_str(&shown).unwrap();
    assert_eq!(doc["annotations"][0]["annotation_id"], id);
    assert_eq!(doc["annotations"][0]["scope"]["row_index"], 3);
}

#[test]
fn empty_geotagged_feed_succeeds_silently() {
    let dir = TempDir::new().unwrap();
    let out = fieldlog(dir.path(), &["feed", "--geotagged-only"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn offline_run_reports_pending_then_delivers() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    ok(
        dir.path(),
        &["note", "add", "--table", "water_quality", "--text", "gauge replaced"],
    );
    let out = ok(dir.path(), &["sync", "run-once", "--connectivity", "*=down"]);
    assert_eq!(out, "0 delivered, 7 pending\n");
    let out = ok(dir.path(), &["sync", "run-once"]);
    assert_eq!(out, "7 delivered, 0 pending\n");
    assert_eq!(ok(dir.path(), &["sync", "run-once"]), "0 delivered, 0 pending\n");
}

#[test]
fn persisted_connectivity_applies_to_later_runs() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    assert_eq!(
        ok(dir.path(), &["sim", "set", "*=up raw_repo=down"]),
        "*=up raw_repo=down\n"
    );
    assert_eq!(ok(dir.path(), &["sim", "show"]), "*=up raw_repo=down\n");
    assert_eq!(ok(dir.path(), &["sync", "run-once"]), "3 delivered, 3 pending\n");
}

#[test]
fn bad_input_fails_with_one_line() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    let out = fieldlog(
        dir.path(),
        &["entry", "add", "--table", "water_quality", "--value", "Nitrate=abc"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err:?}");
    assert!(err.starts_with("error: ") && err.contains("Nitrate"), "{err:?}");
    assert!(out.stdout.is_empty());

    let out = fieldlog(
        dir.path(),
        &["note", "add", "--table", "water_quality", "--row", "9", "--text", "x"],
    );
    assert!(!out.status.success());
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);

    let out = fieldlog(dir.path(), &["table", "show", "nope"]);
    assert!(!out.status.success());

    let out = fieldlog(dir.path(), &["entry", "add"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chunk_preview_prints_parts() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["chunk-preview", "--text", &"x".repeat(300)]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "3 parts");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(" (1/3)"));
}

#[test]
fn export_writes_into_a_directory() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    let out_dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &[
            "export",
            "--table",
            "water_quality",
            "--out",
            out_dir.path().to_str().unwrap(),
        ],
    );
    let path = Path::new(out.trim());
    assert_eq!(path.parent().unwrap(), out_dir.path());
    assert!(path.file_name().unwrap().to_str().unwrap().ends_with(".export.xml"));
    assert!(std::fs::read_to_string(path).unwrap().contains("Workbook"));
}

#[test]
fn harvest_reads_a_corpus_file() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("posts.tsv");
    std::fs::write(
        &corpus,
        "p1\tu1\t2010-04-01T10:00:00Z\t\t\tfirst #budburst of the year\np2\tu2\t2010-04-01T10:05:00Z\t\t\tno match\n",
    )
    .unwrap();
    let out = ok(
        dir.path(),
        &[
            "harvest",
            "--corpus",
            corpus.to_str().unwrap(),
            "--hashtag",
            "budburst",
            "--new-table",
            "phenology",
        ],
    );
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("1 matched"));
    assert!(lines.next().unwrap().starts_with("1 added, 0 skipped to "));
}

#[test]
fn daemon_runs_the_requested_ticks() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    let config = dir.path().join("fieldlog.toml");
    std::fs::write(&config, "tick_interval_secs = 1\n").unwrap();
    let out = ok(
        dir.path(),
        &["--config", config.to_str().unwrap(), "sync", "daemon", "--ticks", "2"],
    );
    assert_eq!(out, "6 delivered, 0 pending\n0 delivered, 0 pending\n");
}

#[test]
fn bad_config_is_reported() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("fieldlog.toml");
    std::fs::write(&config, "colour = \"red\"\n").unwrap();
    let out = fieldlog(dir.path(), &["--config", config.to_str().unwrap(), "table", "list"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: "));
}

fn get(addr: &str, path: &str) -> String {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    response
}

#[test]
fn serve_answers_over_tcp() {
    let dir = TempDir::new().unwrap();
    seed(dir.path());
    let mut child = Command::new(env!("CARGO_BIN_EXE_fieldlog"))
        .args(["serve", "--bind", "127.0.0.1:0"])
        .env("FIELDLOG_DATA_DIR", dir.path())
        .env("RUST_LOG", "error")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .unwrap_or_else(|| panic!("{line:?}"))
        .to_owned();

    let tables = get(&addr, "/tables");
    let killed = child.kill();
    let _ = child.wait();
    killed.unwrap();
    assert!(tables.starts_with("HTTP/1.1 200"), "{tables}");
    assert!(tables.contains("\"title\":\"water_quality\""), "{tables}");
}
