//! Command line surface.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use fieldlog_core::model::{Annotation, AnnotationKind, CellValue, SinkId, TableDocument, ValueType, Visibility};
use fieldlog_core::sync::{ConnectivityState, SyncStatus};
use serde::Serialize;
use serde_json::Value;

use crate::app::{
    AddEntryRequest, AnnotateRequest, App, AppOptions, ChunkPreviewRequest, ColumnRequest, CreateTableRequest,
    FeedQuery, GeoTagRequest, HarvestRequest, RequeueRequest,
};
use crate::config::Config;
use crate::error::ApiError;

#[derive(Debug, Parser)]
#[command(
    name = "fieldlog",
    version,
    about = "Field data tables, scoped notes and store-and-forward sync"
)]
pub struct Cli {
    /// Data directory (overrides the config file).
    #[arg(long, global = true, env = "FIELDLOG_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// TOML config file.
    #[arg(long, global = true, env = "FIELDLOG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Author recorded on new tables, entries and notes.
    #[arg(long, global = true, env = "FIELDLOG_AUTHOR")]
    pub author: Option<String>,
    /// Connectivity for this run only, as a script line such as
    /// `*=up public_microblog=down`.
    #[arg(long, global = true, value_parser = parse_connectivity)]
    pub connectivity: Option<ConnectivityState>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_connectivity(s: &str) -> Result<ConnectivityState, String> {
    ConnectivityState::parse_line(s)
}

fn parse_column(s: &str) -> Result<ColumnRequest, String> {
    let (name, ty) = s.rsplit_once(':').ok_or("expected NAME:TYPE")?;
    Ok(ColumnRequest {
        name: name.to_owned(),
        value_type: parse_type(ty)?,
    })
}

fn parse_type(s: &str) -> Result<ValueType, String> {
    serde_json::from_value(Value::String(s.to_owned()))
        .map_err(|_| format!("unknown type \"{s}\" (text, number, boolean, timestamp)"))
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or("expected COLUMN=VALUE")?;
    Ok((k.to_owned(), v.to_owned()))
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|_| format!("unknown value \"{s}\""))
}

fn parse_kind(s: &str) -> Result<AnnotationKind, String> {
    parse_enum(s)
}

fn parse_visibility(s: &str) -> Result<Visibility, String> {
    parse_enum(s)
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("expected an RFC 3339 timestamp: {e}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create, list and show tables.
    #[command(subcommand)]
    Table(TableCmd),
    /// Change a table's schema.
    #[command(subcommand)]
    Column(ColumnCmd),
    /// Add data points.
    #[command(subcommand)]
    Entry(EntryCmd),
    /// Add notes bound to a table, row, column or cell.
    #[command(subcommand)]
    Note(NoteCmd),
    /// Notes, newest first.
    Feed(FeedArgs),
    /// Deliver queued items and inspect the queue.
    #[command(subcommand)]
    Sync(SyncCmd),
    /// Simulated connectivity.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Pick observations out of a public post corpus.
    Harvest(HarvestArgs),
    /// Write a table as a SpreadsheetML workbook.
    Export(ExportArgs),
    /// Show how a text would be split for a sink.
    ChunkPreview(ChunkPreviewArgs),
    /// Run the HTTP service with a background sync loop.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct JsonFlag {
    /// Machine-readable JSON output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum TableCmd {
    Create {
        #[arg(long)]
        title: String,
        /// Column as NAME:TYPE; repeatable.
        #[arg(long = "column", value_parser = parse_column)]
        columns: Vec<ColumnRequest>,
        #[command(flatten)]
        out: JsonFlag,
    },
    List {
        #[command(flatten)]
        out: JsonFlag,
    },
    Show {
        /// Table id or unique title.
        table: String,
        #[command(flatten)]
        out: JsonFlag,
    },
}

#[derive(Debug, Subcommand)]
pub enum ColumnCmd {
    Add {
        #[arg(long)]
        table: String,
        #[arg(long)]
        name: String,
        #[arg(long = "type", value_parser = parse_type)]
        value_type: ValueType,
        #[command(flatten)]
        out: JsonFlag,
    },
}

#[derive(Debug, Args)]
pub struct GeoArgs {
    #[arg(long, requires = "lon", allow_negative_numbers = true)]
    pub lat: Option<f64>,
    #[arg(long, requires = "lat", allow_negative_numbers = true)]
    pub lon: Option<f64>,
    /// Free-text location description.
    #[arg(long)]
    pub location: Option<String>,
}

impl GeoArgs {
    fn request(&self) -> Option<GeoTagRequest> {
        (self.lat.is_some() || self.location.is_some()).then(|| GeoTagRequest {
            latitude: self.lat,
            longitude: self.lon,
            description: self.location.clone(),
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum EntryCmd {
    Add {
        #[arg(long)]
        table: String,
        /// Cell value as COLUMN=VALUE; repeatable.
        #[arg(long = "value", value_parser = parse_pair)]
        values: Vec<(String, String)>,
        #[command(flatten)]
        geo: GeoArgs,
        #[command(flatten)]
        out: JsonFlag,
    },
}

#[derive(Debug, Subcommand)]
pub enum NoteCmd {
    Add(NoteArgs),
}

#[derive(Debug, Args)]
pub struct NoteArgs {
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub row: Option<u64>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub text: String,
    #[command(flatten)]
    pub geo: GeoArgs,
    /// note, event or instrument_failure.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<AnnotationKind>,
    /// private (default) or public.
    #[arg(long, value_parser = parse_visibility)]
    pub visibility: Option<Visibility>,
    /// Additional sink; repeatable.
    #[arg(long = "sink")]
    pub sinks: Vec<String>,
    #[arg(long, value_parser = parse_time)]
    pub effective_at: Option<DateTime<Utc>>,
    #[command(flatten)]
    pub out: JsonFlag,
}

#[derive(Debug, Args)]
pub struct FeedArgs {
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub geotagged_only: bool,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<AnnotationKind>,
    /// Only notes by this author.
    #[arg(long = "by")]
    pub by: Option<String>,
    #[arg(long, value_parser = parse_time)]
    pub since: Option<DateTime<Utc>>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub out: JsonFlag,
}

#[derive(Debug, Subcommand)]
pub enum SyncCmd {
    /// Run one delivery tick now.
    RunOnce {
        #[command(flatten)]
        out: JsonFlag,
    },
    Status {
        #[command(flatten)]
        out: JsonFlag,
    },
    /// Return permanently failed deliveries to pending.
    RequeueFailed {
        #[arg(long)]
        sink: Option<String>,
        #[command(flatten)]
        out: JsonFlag,
    },
    /// Tick at the configured interval until stopped.
    Daemon {
        /// Stop after this many ticks.
        #[arg(long)]
        ticks: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimCmd {
    /// Print the simulated connectivity.
    Show {
        #[command(flatten)]
        out: JsonFlag,
    },
    /// Set and persist it, e.g. `sim set "*=down private_db=up"`.
    Set {
        #[arg(value_parser = parse_connectivity)]
        state: ConnectivityState,
        #[command(flatten)]
        out: JsonFlag,
    },
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    /// Tab-separated corpus file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long = "hashtag")]
    pub hashtags: Vec<String>,
    #[arg(long = "keyword")]
    pub keywords: Vec<String>,
    #[arg(long)]
    pub require_geotag: bool,
    /// Append matches to this table.
    #[arg(long, conflicts_with = "new_table")]
    pub table: Option<String>,
    /// Create a table with this title for the matches.
    #[arg(long)]
    pub new_table: Option<String>,
    #[command(flatten)]
    pub out: JsonFlag,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub table: String,
    /// File or directory; defaults to the current directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChunkPreviewArgs {
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub sink: Option<String>,
    #[arg(long)]
    pub max_post_length: Option<usize>,
    #[command(flatten)]
    pub out: JsonFlag,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on (overrides the config file).
    #[arg(long, env = "FIELDLOG_BIND")]
    pub bind: Option<std::net::SocketAddr>,
}

/// Load the config file and apply command line overrides.
pub fn resolve_config(cli: &Cli) -> Result<Config, String> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    if let Some(d) = &cli.data_dir {
        config.data_dir = d.clone();
    }
    if let Some(a) = &cli.author {
        config.author = Some(a.clone());
    }
    if let Command::Serve(ServeArgs { bind: Some(b) }) = &cli.command {
        config.bind = *b;
    }
    Ok(config)
}

pub fn open_app(cli: &Cli) -> Result<App, String> {
    let config = resolve_config(cli)?;
    let mut options = AppOptions::new(config);
    options.connectivity = cli.connectivity.clone();
    App::open(options)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn one_line(s: &str) -> String {
    s.split(['\n', '\r'])
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" / ")
}

pub fn connectivity_line(state: &ConnectivityState) -> String {
    let flag = |up: bool| if up { "up" } else { "down" };
    let mut s = format!("*={}", flag(state.default_up));
    for (sink, up) in &state.sinks {
        let _ = write!(s, " {sink}={}", flag(*up));
    }
    s
}

fn cell_text(v: &CellValue) -> String {
    match v {
        CellValue::Text(t) => one_line(t),
        CellValue::Number(n) => fieldlog_core::export::format_number(*n),
        CellValue::Boolean(b) => b.to_string(),
        CellValue::Timestamp(t) => fieldlog_core::model::clock::format_timestamp(t),
    }
}

fn render_table(doc: &TableDocument) -> String {
    let mut out = String::new();
    let s = &doc.schema;
    let _ = writeln!(out, "{} ({})", s.title, s.table_id);
    let _ = writeln!(
        out,
        "created by {} at {}, schema version {}",
        s.created_by,
        s.created_at.to_rfc3339(),
        s.schema_version
    );
    let _ = writeln!(out, "columns:");
    for c in &s.columns {
        let _ = writeln!(out, "  {} {} (v{})", c.name, c.value_type.as_str(), c.added_at_version);
    }
    let _ = writeln!(out, "entries: {}", doc.entries.len());
    let header: Vec<&str> = ["row", "author", "captured_at"]
        .into_iter()
        .chain(s.columns.iter().map(|c| c.name.as_str()))
        .collect();
    if !doc.entries.is_empty() {
        let _ = writeln!(out, "  {}", header.join("\t"));
    }
    for e in &doc.entries {
        let mut cells = vec![e.row_index.to_string(), e.author.clone(), e.captured_at.to_rfc3339()];
        cells.extend(
            s.columns
                .iter()
                .map(|c| e.values.get(&c.name).map(cell_text).unwrap_or_default()),
        );
        let _ = writeln!(out, "  {}", cells.join("\t"));
    }
    let _ = writeln!(out, "notes: {}", doc.annotations.len());
    out
}

fn render_note(a: &Annotation) -> String {
    let scope = match (a.scope.row_index(), a.scope.column_name()) {
        (None, None) => "table".to_owned(),
        (Some(r), None) => format!("row {r}"),
        (None, Some(c)) => format!("column {c}"),
        (Some(r), Some(c)) => format!("row {r} column {c}"),
    };
    let mut line = format!(
        "{}  {}  {}  {}  [{}] {}",
        a.effective_at.to_rfc3339(),
        a.author,
        a.kind.as_str(),
        a.visibility.as_str(),
        scope,
        one_line(&a.text)
    );
    if let Some(g) = &a.geotag {
        if let Some((lat, lon)) = g.coordinates() {
            let _ = write!(line, "  @{lat},{lon}");
        }
        if let Some(d) = &g.description {
            let _ = write!(line, "  @\"{}\"", one_line(d));
        }
    }
    line.push('\n');
    line
}

fn render_status(s: &SyncStatus) -> String {
    let mut out = format!(
        "{:<18} {:>8} {:>10} {:>10} {:>7}\n",
        "sink", "pending", "in_flight", "delivered", "failed"
    );
    for (sink, c) in &s.sinks {
        let _ = writeln!(
            out,
            "{:<18} {:>8} {:>10} {:>10} {:>7}",
            sink.as_str(),
            c.pending,
            c.in_flight,
            c.delivered,
            c.failed_permanent
        );
    }
    let _ = writeln!(out, "unsettled items: {}", s.unsettled_items);
    match s.oldest_pending_age_secs {
        Some(age) => {
            let _ = writeln!(out, "oldest pending: {age}s");
        }
        None => out.push_str("oldest pending: none\n"),
    }
    for f in &s.failed {
        let _ = writeln!(out, "failed: {} at {}: {}", f.item_id, f.sink, one_line(&f.reason));
    }
    out
}

/// Run one command against an open app and return its standard output.
/// `serve` and `sync daemon` are handled by the caller.
pub fn execute(app: &App, command: &Command) -> Result<String, ApiError> {
    Ok(match command {
        Command::Table(TableCmd::Create { title, columns, out }) => {
            let schema = app.create_table(CreateTableRequest {
                title: title.clone(),
                columns: columns.clone(),
                author: None,
            })?;
            if out.json {
                json(&schema)
            } else {
                format!("{}\n", schema.table_id)
            }
        }
        Command::Table(TableCmd::List { out }) => {
            let tables = app.list_tables()?;
            if out.json {
                json(&tables)
            } else {
                tables
                    .iter()
                    .map(|t| {
                        format!(
                            "{}\t{}\t{} columns\t{} entries\t{} notes\n",
                            t.table_id,
                            one_line(&t.title),
                            t.columns,
                            t.entries,
                            t.annotations
                        )
                    })
                    .collect()
            }
        }
        Command::Table(TableCmd::Show { table, out }) => {
            let doc = app.show_table(table)?;
            if out.json {
                json(&doc)
            } else {
                render_table(&doc)
            }
        }
        Command::Column(ColumnCmd::Add {
            table,
            name,
            value_type,
            out,
        }) => {
            let schema = app.add_column(
                table,
                ColumnRequest {
                    name: name.clone(),
                    value_type: *value_type,
                },
            )?;
            if out.json {
                json(&schema)
            } else {
                format!("{name} added; schema version {}\n", schema.schema_version)
            }
        }
        Command::Entry(EntryCmd::Add {
            table,
            values,
            geo,
            out,
        }) => {
            let entry = app.add_entry(
                table,
                AddEntryRequest {
                    values: values
                        .iter()
                        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                        .collect(),
                    author: None,
                    geotag: geo.request(),
                },
            )?;
            if out.json {
                json(&entry)
            } else {
                format!("{} row {}\n", entry.entry_id, entry.row_index)
            }
        }
        Command::Note(NoteCmd::Add(n)) => {
            let annotation = app.annotate(
                &n.table,
                AnnotateRequest {
                    row: n.row,
                    column: n.column.clone(),
                    text: n.text.clone(),
                    author: None,
                    effective_at: n.effective_at,
                    geotag: n.geo.request(),
                    kind: n.kind,
                    visibility: n.visibility,
                    extra_sinks: (!n.sinks.is_empty()).then(|| {
                        n.sinks
                            .iter()
                            .map(|s| SinkId::from(s.as_str()))
                            .collect::<BTreeSet<_>>()
                    }),
                },
            )?;
            if n.out.json {
                json(&annotation)
            } else {
                format!("{}\n", annotation.annotation_id)
            }
        }
        Command::Feed(f) => {
            let notes = app.feed(FeedQuery {
                table: f.table.clone(),
                geotagged_only: f.geotagged_only,
                kind: f.kind,
                author: f.by.clone(),
                since: f.since,
                limit: f.limit,
            })?;
            if f.out.json {
                json(&notes)
            } else {
                notes.iter().map(render_note).collect()
            }
        }
        Command::Sync(SyncCmd::RunOnce { out }) => {
            let r = app.run_once()?;
            if out.json {
                json(&r)
            } else {
                format!("{} delivered, {} pending\n", r.delivered, r.pending)
            }
        }
        Command::Sync(SyncCmd::Status { out }) => {
            let s = app.sync_status();
            if out.json {
                json(&s)
            } else {
                render_status(&s)
            }
        }
        Command::Sync(SyncCmd::RequeueFailed { sink, out }) => {
            let requeued = app.requeue_failed(RequeueRequest {
                sink: sink.as_deref().map(SinkId::from),
            })?;
            if out.json {
                json(&BTreeMap::from([("requeued", &requeued)]))
            } else {
                format!("{} requeued\n", requeued.len())
            }
        }
        Command::Sim(SimCmd::Show { out }) => {
            let c = app.connectivity();
            if out.json {
                json(&c)
            } else {
                format!("{}\n", connectivity_line(&c))
            }
        }
        Command::Sim(SimCmd::Set { state, out }) => {
            let c = app.set_connectivity(state.clone())?;
            if out.json {
                json(&c)
            } else {
                format!("{}\n", connectivity_line(&c))
            }
        }
        Command::Harvest(h) => {
            let corpus = std::fs::read_to_string(&h.corpus)
                .map_err(|e| ApiError::field("corpus", format!("cannot read {}: {e}", h.corpus.display())))?;
            let r = app.harvest(HarvestRequest {
                corpus,
                hashtags: h.hashtags.clone(),
                keywords: h.keywords.clone(),
                require_geotag: h.require_geotag,
                table: h.table.clone(),
                new_table: h.new_table.clone(),
                author: None,
            })?;
            if h.out.json {
                json(&r)
            } else {
                let mut s = format!("{} matched\n", r.observations.len());
                if let Some(t) = &r.table_id {
                    let _ = writeln!(s, "{} added, {} skipped to {t}", r.added.len(), r.skipped);
                }
                s
            }
        }
        Command::Export(e) => format!("{}\n", app.export_to(&e.table, &e.out)?.display()),
        Command::ChunkPreview(c) => {
            let p = app.chunk_preview(ChunkPreviewRequest {
                text: c.text.clone(),
                sink: c.sink.as_deref().map(SinkId::from),
                max_post_length: c.max_post_length,
            })?;
            if c.out.json {
                json(&p)
            } else {
                let mut s = format!("{} part{}\n", p.count, if p.count == 1 { "" } else { "s" });
                for part in &p.parts {
                    let _ = writeln!(s, "{}", one_line(part));
                }
                s
            }
        }
        Command::Serve(_) | Command::Sync(SyncCmd::Daemon { .. }) => {
            return Err(ApiError::bad_request("long-running commands are not executed here"))
        }
    })
}

/// Tick forever (or `ticks` times), printing one summary line per tick.
pub fn daemon(app: &App, ticks: Option<u64>, mut print: impl FnMut(&str)) -> Result<(), ApiError> {
    let interval = app.config().tick_interval();
    let mut n = 0;
    loop {
        let r = app.run_once()?;
        print(&format!("{} delivered, {} pending\n", r.delivered, r.pending));
        n += 1;
        if ticks.is_some_and(|t| n >= t) {
            return Ok(());
        }
        std::thread::sleep(interval);
    }
}

/// Open the app and serve until interrupted.
pub fn serve(app: App) -> Result<(), String> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| format!("cannot start runtime: {e}"))?;
    let app = Arc::new(app);
    runtime.block_on(async move {
        let bind = app.config().bind;
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| format!("cannot listen on {bind}: {e}"))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on http://{addr}");
        let ticker = {
            let app = app.clone();
            tokio::spawn(async move {
                let mut every = tokio::time::interval(app.config().tick_interval());
                every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
                loop {
                    every.tick().await;
                    let app = app.clone();
                    match tokio::task::spawn_blocking(move || app.run_once()).await {
                        Ok(Ok(r)) if r.delivered > 0 => {
                            tracing::info!(delivered = r.delivered, pending = r.pending, "sync tick")
                        }
                        Ok(Ok(_)) => {}
                        Ok(Err(e)) => tracing::warn!(error = %e, "sync tick failed"),
                        Err(e) => tracing::error!(error = %e, "sync tick panicked"),
                    }
                }
            })
        };
        let result = axum::serve(listener, crate::http::router(app.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string());
        ticker.abort();
        if let Err(e) = app.flush_store() {
            tracing::warn!(error = %e, "final flush failed");
        }
        result
    })
}
