//! Every operation the service offers, shared by the HTTP handlers and the
//! CLI so both surfaces behave identically.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use fieldlog_core::export::{export_spreadsheet, to_spreadsheet};
use fieldlog_core::harvest::{self, create_harvest_table, harvest_to_table, parse_corpus, HarvestSpec, Observation};
use fieldlog_core::model::clock::{Clock, SystemClock};
use fieldlog_core::model::{
    AnnotateOptions, Annotation, AnnotationKind, Entry, FeedFilter, GeoTag, IdGenerator, ItemId, Scope, SinkId,
    TableDocument, TableId, TableSchema, ValueType, Visibility,
};
use fieldlog_core::store::{Store, StoreOptions};
use fieldlog_core::sync::{
    chunk_for_sink, ConnectivityProbe, ConnectivityState, FaultModel, MockSink, ScriptedConnectivity, Sink,
    SinkDescriptor, SinkRegistry, SyncConfig, SyncEngine, SyncStatus, TickReport, MICROBLOG_POST_LENGTH,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::info;

use crate::config::Config;
use crate::error::ApiError;

/// Simulated connectivity set by an operator; survives restarts.
pub const CONNECTIVITY_FILE: &str = "connectivity.json";

pub type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRequest {
    pub name: String,
    #[serde(rename = "type")]
    pub value_type: ValueType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTableRequest {
    pub title: String,
    #[serde(default)]
    pub columns: Vec<ColumnRequest>,
    #[serde(default)]
    pub author: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub table_id: TableId,
    pub title: String,
    pub schema_version: u32,
    pub columns: usize,
    pub entries: usize,
    pub annotations: usize,
    pub created_by: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoTagRequest {
    #[serde(default)]
    pub latitude: Option<f64>,
    #[serde(default)]
    pub longitude: Option<f64>,
    /// Free-text location, for when no fix is available.
    #[serde(default)]
    pub description: Option<String>,
}

impl GeoTagRequest {
    fn into_geotag(self) -> ApiResult<GeoTag> {
        let coords = match (self.latitude, self.longitude) {
            (Some(lat), Some(lon)) => Some((lat, lon)),
            (None, None) => None,
            _ => {
                return Err(ApiError::field(
                    "geotag",
                    "latitude and longitude must be given together",
                ))
            }
        };
        let tag = match (self.description, coords) {
            (Some(d), c) => GeoTag::described(d, c),
            (None, Some((lat, lon))) => GeoTag::device(lat, lon),
            (None, None) => return Err(ApiError::field("geotag", "a geotag needs coordinates or a description")),
        };
        Ok(tag?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddEntryRequest {
    /// Column name to value. Strings are parsed by the column type; JSON
    /// numbers and booleans are accepted as well. `null` leaves a cell empty.
    #[serde(default)]
    pub values: BTreeMap<String, Value>,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub geotag: Option<GeoTagRequest>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateRequest {
    #[serde(default)]
    pub row: Option<u64>,
    #[serde(default)]
    pub column: Option<String>,
    pub text: String,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub effective_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub geotag: Option<GeoTagRequest>,
    #[serde(default)]
    pub kind: Option<AnnotationKind>,
    #[serde(default)]
    pub visibility: Option<Visibility>,
    #[serde(default)]
    pub extra_sinks: Option<BTreeSet<SinkId>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedQuery {
    /// Table id or unique title; all tables when absent.
    pub table: Option<String>,
    pub geotagged_only: bool,
    pub kind: Option<AnnotationKind>,
    pub author: Option<String>,
    pub since: Option<DateTime<Utc>>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOnce {
    pub delivered: usize,
    pub pending: usize,
    pub report: TickReport,
    pub status: SyncStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequeueRequest {
    pub sink: Option<SinkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requeued {
    pub item_id: ItemId,
    pub sink: SinkId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestRequest {
    /// Tab-separated corpus text.
    pub corpus: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub require_geotag: bool,
    /// Append matches to this existing table (id or unique title).
    #[serde(default)]
    pub table: Option<String>,
    /// Create a table with this title and append matches to it.
    #[serde(default)]
    pub new_table: Option<String>,
    #[serde(default)]
    pub author: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestResponse {
    pub observations: Vec<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_id: Option<TableId>,
    pub added: Vec<Entry>,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkPreviewRequest {
    pub text: String,
    /// Use this sink's limit. Defaults to `public_microblog`.
    #[serde(default)]
    pub sink: Option<SinkId>,
    /// Explicit limit; overrides `sink`.
    #[serde(default)]
    pub max_post_length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPreview {
    pub max_post_length: Option<usize>,
    pub characters: usize,
    pub count: usize,
    pub parts: Vec<String>,
}

pub struct AppOptions {
    pub config: Config,
    pub clock: Arc<dyn Clock>,
    pub ids: Arc<IdGenerator>,
    /// Connectivity for this process only; beats everything else.
    pub connectivity: Option<ConnectivityState>,
}

impl AppOptions {
    pub fn new(config: Config) -> Self {
        AppOptions {
            config,
            clock: Arc::new(SystemClock),
            ids: Arc::new(IdGenerator::from_entropy()),
            connectivity: None,
        }
    }
}

pub struct App {
    config: Config,
    store: Store,
    engine: SyncEngine,
    sinks: BTreeMap<SinkId, Arc<MockSink>>,
    script: Option<ScriptedConnectivity>,
    pinned: Option<ConnectivityState>,
    simulated: RwLock<Option<ConnectivityState>>,
}

fn author_or(default: Option<&str>, given: Option<String>) -> ApiResult<String> {
    given
        .or_else(|| default.map(str::to_owned))
        .ok_or_else(|| ApiError::field("author", "no author given and no default author configured"))
}

fn raw_value(column: &str, v: &Value) -> ApiResult<Option<String>> {
    Ok(match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => {
            return Err(ApiError::field(
                format!("values.{column}"),
                format!("column \"{column}\" takes a scalar value"),
            ))
        }
    })
}

impl App {
    pub fn open(options: AppOptions) -> Result<App, String> {
        let AppOptions {
            config,
            clock,
            ids,
            connectivity,
        } = options;
        config.validate().map_err(|e| e.to_string())?;
        fs::create_dir_all(&config.data_dir)
            .map_err(|e| format!("cannot create {}: {e}", config.data_dir.display()))?;
        let mut sinks = BTreeMap::new();
        for s in config.effective_sinks() {
            let path = s.log_path(&config.data_dir);
            let sink = MockSink::file_backed(s.descriptor(), &path)
                .map_err(|e| format!("sink {}: cannot read {}: {e}", s.id, path.display()))?
                .with_faults(
                    FaultModel {
                        transient_probability: s.transient_probability,
                        ack_loss_probability: s.ack_loss_probability,
                    },
                    s.fault_seed,
                );
            sinks.insert(s.id.clone(), Arc::new(sink));
        }
        let private = sinks
            .get(&SinkId::PrivateDb)
            .cloned()
            .ok_or("the private_db sink is mandatory")?;
        let mut registry = SinkRegistry::new(private).map_err(|e| e.to_string())?;
        for (id, sink) in &sinks {
            if *id != SinkId::PrivateDb {
                registry.register(sink.clone()).map_err(|e| e.to_string())?;
            }
        }
        let script = match &config.connectivity_script {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                Some(ScriptedConnectivity::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?)
            }
            None => None,
        };
        let simulated = read_connectivity(&config.data_dir)?;
        let store = Store::open(
            StoreOptions::new(&config.data_dir)
                .clock(clock)
                .ids(ids)
                .sinks(sinks.keys().cloned()),
        )
        .map_err(|e| format!("cannot open store in {}: {e}", config.data_dir.display()))?;
        let engine = SyncEngine::new(
            registry,
            SyncConfig {
                tick_interval: config.tick_interval(),
                ..SyncConfig::default()
            },
        );
        Ok(App {
            config,
            store,
            engine,
            sinks,
            script,
            pinned: connectivity,
            simulated: RwLock::new(simulated),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn engine(&self) -> &SyncEngine {
        &self.engine
    }

    pub fn sink(&self, id: &SinkId) -> Option<&Arc<MockSink>> {
        self.sinks.get(id)
    }

    fn now(&self) -> DateTime<Utc> {
        self.store.clock().now()
    }

    fn author(&self, given: Option<String>) -> ApiResult<String> {
        author_or(self.config.author.as_deref(), given)
    }

    pub fn resolve_table(&self, name: &str) -> ApiResult<TableId> {
        Ok(self.store.resolve_table(name)?)
    }

    // Tables -----------------------------------------------------------------

    pub fn create_table(&self, req: CreateTableRequest) -> ApiResult<TableSchema> {
        let author = self.author(req.author)?;
        let columns: Vec<(String, ValueType)> = req.columns.into_iter().map(|c| (c.name, c.value_type)).collect();
        let schema = self.store.create_table(&req.title, &columns, &author)?;
        info!(table = %schema.table_id, "table created");
        Ok(schema)
    }

    pub fn list_tables(&self) -> ApiResult<Vec<TableSummary>> {
        self.store
            .tables()
            .into_iter()
            .map(|s| {
                let (entries, annotations) = self
                    .store
                    .with_table(&s.table_id, |d| (d.entries.len(), d.annotations.len()))?;
                Ok(TableSummary {
                    table_id: s.table_id,
                    title: s.title,
                    schema_version: s.schema_version,
                    columns: s.columns.len(),
                    entries,
                    annotations,
                    created_by: s.created_by,
                    created_at: s.created_at,
                })
            })
            .collect()
    }

    pub fn show_table(&self, table: &str) -> ApiResult<TableDocument> {
        let id = self.resolve_table(table)?;
        Ok(self.store.table(&id)?)
    }

    pub fn add_column(&self, table: &str, req: ColumnRequest) -> ApiResult<TableSchema> {
        let id = self.resolve_table(table)?;
        Ok(self.store.add_column(&id, &req.name, req.value_type)?)
    }

    pub fn add_entry(&self, table: &str, req: AddEntryRequest) -> ApiResult<Entry> {
        let id = self.resolve_table(table)?;
        let author = self.author(req.author)?;
        let mut values = BTreeMap::new();
        for (column, v) in &req.values {
            if let Some(raw) = raw_value(column, v)? {
                values.insert(column.clone(), raw);
            }
        }
        let geotag = req.geotag.map(GeoTagRequest::into_geotag).transpose()?;
        Ok(self.store.add_entry(&id, &values, &author, geotag)?)
    }

    pub fn annotate(&self, table: &str, req: AnnotateRequest) -> ApiResult<Annotation> {
        let id = self.resolve_table(table)?;
        let author = self.author(req.author)?;
        let options = AnnotateOptions {
            effective_at: req.effective_at,
            geotag: req.geotag.map(GeoTagRequest::into_geotag).transpose()?,
            kind: req.kind,
            visibility: req.visibility,
            extra_sinks: req.extra_sinks,
        };
        let scope = Scope::from_parts(id, req.row, req.column);
        Ok(self.store.annotate(scope, &req.text, &author, options)?)
    }

    pub fn feed(&self, q: FeedQuery) -> ApiResult<Vec<Annotation>> {
        let table = q.table.as_deref().map(|t| self.resolve_table(t)).transpose()?;
        let filter = FeedFilter {
            geotagged_only: q.geotagged_only,
            kind: q.kind,
            author: q.author,
            since: q.since,
        };
        let mut out = self.store.feed(table.as_ref(), &filter);
        if let Some(n) = q.limit {
            out.truncate(n);
        }
        Ok(out)
    }

    pub fn export(&self, table: &str) -> ApiResult<(TableId, String)> {
        let id = self.resolve_table(table)?;
        let body = self.store.with_table(&id, to_spreadsheet)?;
        Ok((id, body))
    }

    pub fn export_to(&self, table: &str, dest: &Path) -> ApiResult<PathBuf> {
        let id = self.resolve_table(table)?;
        Ok(export_spreadsheet(&self.store, &id, dest)?)
    }

    // Sync -------------------------------------------------------------------

    /// Connectivity for the next tick: the per-process pin, else the
    /// operator-set simulation, else the configured script, else all up.
    pub fn probe(&self) -> ConnectivityState {
        if let Some(c) = &self.pinned {
            return c.clone();
        }
        if let Some(c) = self.simulated.read().unwrap().clone() {
            return c;
        }
        match &self.script {
            Some(s) => s.probe(),
            None => ConnectivityState::all_up(),
        }
    }

    pub fn connectivity(&self) -> ConnectivityState {
        self.pinned
            .clone()
            .or_else(|| self.simulated.read().unwrap().clone())
            .unwrap_or_else(ConnectivityState::all_up)
    }

    pub fn set_connectivity(&self, state: ConnectivityState) -> ApiResult<ConnectivityState> {
        let path = self.config.data_dir.join(CONNECTIVITY_FILE);
        let text = serde_json::to_string_pretty(&state).map_err(|e| ApiError::internal(e.to_string()))?;
        fs::write(&path, text).map_err(|e| ApiError::internal(format!("cannot write {}: {e}", path.display())))?;
        *self.simulated.write().unwrap() = Some(state.clone());
        Ok(state)
    }

    pub fn sync_status(&self) -> SyncStatus {
        self.engine.status(&self.store.queue(), self.now())
    }

    pub fn run_once(&self) -> ApiResult<RunOnce> {
        let connectivity = self.probe();
        let report = self.engine.tick(&self.store, &connectivity, self.now())?;
        let status = self.sync_status();
        let delivered = report.delivered();
        let pending = status.total(|c| c.pending + c.in_flight);
        Ok(RunOnce {
            delivered,
            pending,
            report,
            status,
        })
    }

    pub fn requeue_failed(&self, req: RequeueRequest) -> ApiResult<Vec<Requeued>> {
        if let Some(s) = &req.sink {
            if !self.sinks.contains_key(s) {
                return Err(ApiError::field("sink", format!("sink {s} is not registered")));
            }
        }
        Ok(self
            .store
            .requeue_failed(req.sink.as_ref())?
            .into_iter()
            .map(|(item_id, sink)| Requeued { item_id, sink })
            .collect())
    }

    /// Write dirty tables and the queue, and empty the journal.
    pub fn flush_store(&self) -> ApiResult<()> {
        Ok(self.store.flush()?)
    }

    // Harvest and previews ------------------------------------------------------

    pub fn harvest(&self, req: HarvestRequest) -> ApiResult<HarvestResponse> {
        if req.table.is_some() && req.new_table.is_some() {
            return Err(ApiError::field("table", "give either table or new_table, not both"));
        }
        let spec = HarvestSpec::new(&req.hashtags, &req.keywords, req.require_geotag)?;
        let posts = parse_corpus(&req.corpus)?;
        let observations = harvest::harvest(&posts, &spec);
        let target = match (&req.table, &req.new_table) {
            (Some(t), None) => Some(self.resolve_table(t)?),
            (None, Some(title)) => {
                let author = self.author(req.author.clone())?;
                Some(create_harvest_table(&self.store, title, &author)?.table_id)
            }
            _ => None,
        };
        let (added, skipped) = match &target {
            Some(id) => {
                let author = self.author(req.author)?;
                let import = harvest_to_table(&self.store, id, &observations, &author)?;
                (import.added, import.skipped)
            }
            None => (Vec::new(), 0),
        };
        Ok(HarvestResponse {
            observations,
            table_id: target,
            added,
            skipped,
        })
    }

    pub fn chunk_preview(&self, req: ChunkPreviewRequest) -> ApiResult<ChunkPreview> {
        let limit = match (req.max_post_length, &req.sink) {
            (Some(n), _) => Some(n),
            (None, Some(id)) => {
                self.sinks
                    .get(id)
                    .ok_or_else(|| ApiError::field("sink", format!("sink {id} is not registered")))?
                    .descriptor()
                    .max_post_length
            }
            (None, None) => Some(
                self.sinks
                    .get(&SinkId::PublicMicroblog)
                    .map(|s| s.descriptor())
                    .and_then(|d: &SinkDescriptor| d.max_post_length)
                    .unwrap_or(MICROBLOG_POST_LENGTH),
            ),
        };
        let parts = chunk_for_sink(&req.text, limit).map_err(|e| ApiError::field("text", e.to_string()))?;
        Ok(ChunkPreview {
            max_post_length: limit,
            characters: req.text.chars().count(),
            count: parts.len(),
            parts,
        })
    }
}

fn read_connectivity(dir: &Path) -> Result<Option<ConnectivityState>, String> {
    let path = dir.join(CONNECTIVITY_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| format!("{}: {e}", path.display())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(format!("cannot read {}: {e}", path.display())),
    }
}
