//! The durable store: every table document in memory, a shared write-ahead
//! journal, and the outbound sync queue.
//!
//! Files in the data directory:
//! - `<table_id>.xml`, one per table, rewritten at snapshot time;
//! - `journal.log`, every mutation since the last snapshot;
//! - `queue.json`, the sync queue as of the last snapshot.
//!
//! A mutation returns only after its journal record is written. Startup loads
//! the snapshot files and replays the journal on top. Replay skips records
//! whose effect is already in a snapshot, so a crash part-way through a
//! snapshot recovers cleanly.

mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, error, info};

pub use ops::StoreOp;

use crate::model::clock::{Clock, SystemClock};
use crate::model::{
    feed, AnnotateOptions, Annotation, CellValue, Entry, FeedFilter, GeoTag, IdGenerator, ItemId, ModelError, Scope,
    SinkId, TableDocument, TableId, TableSchema, ValueType,
};
use crate::persistence::document::{document_file_name, save_document_with};
use crate::persistence::io::write_atomic;
use crate::persistence::journal::JOURNAL_FILE;
use crate::persistence::{from_xml, Journal, JournalOptions, PersistenceError, WriteBudget};
use crate::sync::{DeliveryState, PayloadRef, QueueHost, QueueItem, QueueOp, SyncError, SyncQueue};
use crate::xml;

pub const QUEUE_FILE: &str = "queue.json";
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 50;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error("table name \"{0}\" matches more than one table; use the table id")]
    AmbiguousTable(String),
    #[error("journal record {seq} cannot be replayed: {reason}")]
    Replay { seq: u64, reason: String },
    #[error("store stopped after a failed write; reopen it")]
    Poisoned,
}

pub struct StoreOptions {
    pub data_dir: PathBuf,
    /// Snapshot after this many journal records.
    pub snapshot_every: u64,
    /// fsync journal appends and snapshot files.
    pub sync_writes: bool,
    /// Crash injection for tests.
    pub budget: Option<WriteBudget>,
    /// Sinks items may be routed to. `private_db` is always included.
    pub sinks: BTreeSet<SinkId>,
    pub clock: Arc<dyn Clock>,
    pub ids: Arc<IdGenerator>,
}

impl StoreOptions {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        StoreOptions {
            data_dir: data_dir.into(),
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            sync_writes: true,
            budget: None,
            sinks: BTreeSet::from([SinkId::PrivateDb]),
            clock: Arc::new(SystemClock),
            ids: Arc::new(IdGenerator::from_entropy()),
        }
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn ids(mut self, ids: Arc<IdGenerator>) -> Self {
        self.ids = ids;
        self
    }

    pub fn sinks(mut self, sinks: impl IntoIterator<Item = SinkId>) -> Self {
        self.sinks = sinks.into_iter().collect();
        self.sinks.insert(SinkId::PrivateDb);
        self
    }

    pub fn snapshot_every(mut self, n: u64) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    pub fn sync_writes(mut self, on: bool) -> Self {
        self.sync_writes = on;
        self
    }

    pub fn budget(mut self, budget: WriteBudget) -> Self {
        self.budget = Some(budget);
        self
    }
}

/// Everything the store holds, for comparisons in tests and tools.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreState {
    pub tables: BTreeMap<TableId, TableDocument>,
    pub queue: SyncQueue,
}

#[derive(Debug, Serialize, Deserialize)]
struct QueueSnapshot {
    /// Journal records up to and including this one are reflected here.
    last_seq: u64,
    queue: SyncQueue,
}

struct Core {
    journal: Journal<StoreOp>,
    queue: SyncQueue,
    next_sequence: u64,
    since_snapshot: u64,
    dirty: BTreeSet<TableId>,
    poisoned: bool,
}

type Doc = Arc<Mutex<TableDocument>>;

/// Lock order: `gate` (shared for mutations, exclusive for snapshots), then
/// one table, then `core`. The `tables` map lock is never held while waiting
/// on anything else, except by `create_table` under `core`.
pub struct Store {
    dir: PathBuf,
    snapshot_every: u64,
    sync_writes: bool,
    budget: Option<WriteBudget>,
    sinks: BTreeSet<SinkId>,
    clock: Arc<dyn Clock>,
    ids: Arc<IdGenerator>,
    gate: RwLock<()>,
    tables: RwLock<BTreeMap<TableId, Doc>>,
    core: Mutex<Core>,
}

impl Store {
    pub fn open(options: StoreOptions) -> Result<Store, StoreError> {
        let dir = options.data_dir;
        fs::create_dir_all(&dir).map_err(|source| PersistenceError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut tables = load_tables(&dir)?;
        let snapshot = load_queue(&dir)?;
        let mut queue = snapshot.queue;
        let (mut journal, replay) = Journal::<StoreOp>::open(
            &dir.join(JOURNAL_FILE),
            JournalOptions {
                sync: options.sync_writes,
                budget: options.budget.clone(),
            },
        )?;
        journal.advance_to(snapshot.last_seq + 1);

        let mut dirty = BTreeSet::new();
        for record in &replay.records {
            replay_one(
                &mut tables,
                &mut queue,
                snapshot.last_seq,
                record.record_seq,
                &record.payload,
                &mut dirty,
            )
            .map_err(|reason| StoreError::Replay {
                seq: record.record_seq,
                reason,
            })?;
        }
        if !replay.records.is_empty() {
            info!(records = replay.records.len(), end = ?replay.end, "replayed journal");
        }
        let next_sequence = tables
            .values()
            .flat_map(|d| d.annotations.iter().map(|a| a.sequence))
            .max()
            .map_or(1, |s| s + 1);
        let mut sinks = options.sinks;
        sinks.insert(SinkId::PrivateDb);
        Ok(Store {
            dir,
            snapshot_every: options.snapshot_every.max(1),
            sync_writes: options.sync_writes,
            budget: options.budget,
            sinks,
            clock: options.clock,
            ids: options.ids,
            gate: RwLock::new(()),
            tables: RwLock::new(tables.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            core: Mutex::new(Core {
                journal,
                queue,
                next_sequence,
                since_snapshot: replay.records.len() as u64,
                dirty,
                poisoned: false,
            }),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn registered_sinks(&self) -> &BTreeSet<SinkId> {
        &self.sinks
    }

    fn doc(&self, table_id: &TableId) -> Result<Doc, StoreError> {
        self.tables
            .read()
            .unwrap()
            .get(table_id)
            .cloned()
            .ok_or_else(|| ModelError::UnknownTable(table_id.clone()).into())
    }

    /// Find a table by id, or else by its title when exactly one table has
    /// that title.
    pub fn resolve_table(&self, name: &str) -> Result<TableId, StoreError> {
        let id = TableId::new(name);
        let docs: Vec<(TableId, Doc)> = {
            let tables = self.tables.read().unwrap();
            if tables.contains_key(&id) {
                return Ok(id);
            }
            tables.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
        };
        let mut hits = docs
            .iter()
            .filter(|(_, d)| d.lock().unwrap().schema.title == name)
            .map(|(id, _)| id.clone());
        match (hits.next(), hits.next()) {
            (Some(id), None) => Ok(id),
            (Some(_), Some(_)) => Err(StoreError::AmbiguousTable(name.to_owned())),
            (None, _) => Err(ModelError::UnknownTable(id).into()),
        }
    }

    /// Schemas of every table, oldest first.
    pub fn tables(&self) -> Vec<TableSchema> {
        let docs: Vec<Doc> = self.tables.read().unwrap().values().cloned().collect();
        let mut v: Vec<TableSchema> = docs.iter().map(|d| d.lock().unwrap().schema.clone()).collect();
        v.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.table_id.cmp(&b.table_id))
        });
        v
    }

    pub fn table(&self, table_id: &TableId) -> Result<TableDocument, StoreError> {
        self.with_table(table_id, TableDocument::clone)
    }

    pub fn with_table<R>(&self, table_id: &TableId, f: impl FnOnce(&TableDocument) -> R) -> Result<R, StoreError> {
        let doc = self.doc(table_id)?;
        let guard = doc.lock().unwrap();
        Ok(f(&guard))
    }

    pub fn queue(&self) -> SyncQueue {
        self.core.lock().unwrap().queue.clone()
    }

    pub fn state(&self) -> StoreState {
        let _gate = self.gate.write().unwrap();
        let tables = self
            .tables
            .read()
            .unwrap()
            .iter()
            .map(|(id, d)| (id.clone(), d.lock().unwrap().clone()))
            .collect();
        StoreState {
            tables,
            queue: self.queue(),
        }
    }

    fn journal(&self, core: &mut Core, op: &StoreOp) -> Result<u64, StoreError> {
        if core.poisoned {
            return Err(StoreError::Poisoned);
        }
        match core.journal.append(op) {
            Ok(seq) => {
                core.since_snapshot += 1;
                if let Some(id) = op.table_id() {
                    core.dirty.insert(id.clone());
                }
                Ok(seq)
            }
            Err(e) => {
                core.poisoned = true;
                Err(e.into())
            }
        }
    }

    fn after_write(&self) {
        let due = self.core.lock().unwrap().since_snapshot >= self.snapshot_every;
        if due {
            if let Err(e) = self.snapshot(false) {
                // The journal still holds everything; only the snapshot is lost.
                error!(error = %e, "snapshot failed");
            }
        }
    }

    pub fn create_table(
        &self,
        title: &str,
        columns: &[(String, ValueType)],
        author: &str,
    ) -> Result<TableSchema, StoreError> {
        let schema = {
            let _gate = self.gate.read().unwrap();
            let now = self.clock.now();
            let schema = TableSchema::new(self.ids.table_id(now), title, columns, author, now)?;
            let mut core = self.core.lock().unwrap();
            let op = StoreOp::CreateTable { schema: schema.clone() };
            self.journal(&mut core, &op)?;
            self.tables.write().unwrap().insert(
                schema.table_id.clone(),
                Arc::new(Mutex::new(TableDocument::new(schema.clone()))),
            );
            schema
        };
        self.after_write();
        Ok(schema)
    }

    pub fn add_column(&self, table_id: &TableId, name: &str, value_type: ValueType) -> Result<TableSchema, StoreError> {
        let schema = {
            let _gate = self.gate.read().unwrap();
            let doc = self.doc(table_id)?;
            let mut doc = doc.lock().unwrap();
            let mut probe = TableDocument::new(doc.schema.clone());
            let column = probe.add_column(name, value_type)?.clone();
            let op = StoreOp::AddColumn {
                table_id: table_id.clone(),
                column,
            };
            let mut core = self.core.lock().unwrap();
            self.journal(&mut core, &op)?;
            op.apply_to_doc(&mut doc, &core.queue)?;
            doc.schema.clone()
        };
        self.after_write();
        Ok(schema)
    }

    /// Add an entry from raw text values, parsed against the column types.
    pub fn add_entry(
        &self,
        table_id: &TableId,
        raw: &BTreeMap<String, String>,
        author: &str,
        geotag: Option<GeoTag>,
    ) -> Result<Entry, StoreError> {
        let values = self.with_table(table_id, |d| d.parse_values(raw))??;
        self.add_entry_values(table_id, values, author, geotag)
    }

    pub fn add_entry_values(
        &self,
        table_id: &TableId,
        values: BTreeMap<String, CellValue>,
        author: &str,
        geotag: Option<GeoTag>,
    ) -> Result<Entry, StoreError> {
        let entry = {
            let _gate = self.gate.read().unwrap();
            let doc = self.doc(table_id)?;
            let mut doc = doc.lock().unwrap();
            let now = self.clock.now();
            let entry = Entry {
                entry_id: self.ids.entry_id(now),
                row_index: doc.next_row_index(),
                values,
                author: author.to_owned(),
                captured_at: now,
                geotag,
            };
            doc.check_entry(&entry)?;
            let mut core = self.core.lock().unwrap();
            let enqueue = QueueItem::new(
                self.ids.item_id(now),
                PayloadRef::Entry {
                    table_id: table_id.clone(),
                    entry_id: entry.entry_id.clone(),
                },
                self.entry_targets(),
                author,
                now,
                core.queue.next_enqueue_seq(),
            );
            core.queue.check(&QueueOp::Enqueued { item: enqueue.clone() })?;
            let op = StoreOp::AddEntry {
                table_id: table_id.clone(),
                entry: entry.clone(),
                enqueue,
            };
            self.journal(&mut core, &op)?;
            op.apply_to_doc(&mut doc, &core.queue)?;
            op.apply_to_queue(&mut core.queue)?;
            entry
        };
        self.after_write();
        Ok(entry)
    }

    /// Entries go to the private database, and to the raw-data repository
    /// when one is registered.
    fn entry_targets(&self) -> BTreeSet<SinkId> {
        self.sinks
            .iter()
            .filter(|s| matches!(s, SinkId::PrivateDb | SinkId::RawRepo))
            .cloned()
            .collect()
    }

    fn annotation_targets(&self, extra: &BTreeSet<SinkId>) -> Result<BTreeSet<SinkId>, SyncError> {
        let mut targets = BTreeSet::from([SinkId::PrivateDb]);
        for sink in extra {
            if *sink == SinkId::RawRepo {
                return Err(SyncError::SinkNotAllowed {
                    sink: sink.clone(),
                    payload: "annotations",
                });
            }
            if !self.sinks.contains(sink) {
                return Err(SyncError::UnregisteredSink(sink.clone()));
            }
            targets.insert(sink.clone());
        }
        Ok(targets)
    }

    pub fn annotate(
        &self,
        scope: Scope,
        text: &str,
        author: &str,
        options: AnnotateOptions,
    ) -> Result<Annotation, StoreError> {
        let annotation = {
            let _gate = self.gate.read().unwrap();
            let resolved = options.resolve()?;
            let targets = self.annotation_targets(&resolved.extra_sinks)?;
            let table_id = scope.table_id().clone();
            let doc = self.doc(&table_id)?;
            let mut doc = doc.lock().unwrap();
            let now = self.clock.now();
            let mut core = self.core.lock().unwrap();
            let annotation = Annotation {
                annotation_id: self.ids.annotation_id(now),
                author: author.to_owned(),
                captured_at: now,
                effective_at: options.effective_at.unwrap_or(now),
                text: text.to_owned(),
                geotag: options.geotag,
                kind: resolved.kind,
                visibility: resolved.visibility,
                extra_sinks: resolved.extra_sinks,
                scope,
                sequence: core.next_sequence,
                receipts: Vec::new(),
            };
            doc.check_annotation(&annotation)?;
            let enqueue = QueueItem::new(
                self.ids.item_id(now),
                PayloadRef::Annotation {
                    table_id,
                    annotation_id: annotation.annotation_id.clone(),
                },
                targets,
                author,
                now,
                core.queue.next_enqueue_seq(),
            );
            core.queue.check(&QueueOp::Enqueued { item: enqueue.clone() })?;
            let op = StoreOp::Annotate {
                annotation: annotation.clone(),
                enqueue,
            };
            self.journal(&mut core, &op)?;
            core.next_sequence += 1;
            op.apply_to_doc(&mut doc, &core.queue)?;
            op.apply_to_queue(&mut core.queue)?;
            annotation
        };
        self.after_write();
        Ok(annotation)
    }

    /// Annotations newest first. Without a table id this is the cross-table
    /// feed; each table is read consistently on its own.
    pub fn feed(&self, table_id: Option<&TableId>, filter: &FeedFilter) -> Vec<Annotation> {
        let docs: Vec<Doc> = {
            let tables = self.tables.read().unwrap();
            match table_id {
                Some(id) => tables.get(id).cloned().into_iter().collect(),
                None => tables.values().cloned().collect(),
            }
        };
        let pick = |d: &Doc| -> Vec<Annotation> {
            let d = d.lock().unwrap();
            d.annotations.iter().filter(|a| filter.matches(a)).cloned().collect()
        };
        #[cfg(feature = "parallel")]
        let picked: Vec<Annotation> = {
            use rayon::prelude::*;
            docs.par_iter().flat_map_iter(pick).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let picked: Vec<Annotation> = docs.iter().flat_map(pick).collect();
        feed(picked.iter(), &FeedFilter::default())
    }

    /// Move every failed_permanent delivery (optionally at one sink) back to
    /// pending.
    pub fn requeue_failed(&self, sink: Option<&SinkId>) -> Result<Vec<(ItemId, SinkId)>, StoreError> {
        let targets: Vec<(ItemId, SinkId)> = self.read_queue(|q| {
            q.items()
                .into_iter()
                .flat_map(|item| {
                    item.deliveries
                        .iter()
                        .filter(|(s, d)| d.state == DeliveryState::FailedPermanent && sink.is_none_or(|x| x == *s))
                        .map(|(s, _)| (item.item_id.clone(), s.clone()))
                        .collect::<Vec<_>>()
                })
                .collect()
        });
        for (item_id, sink) in &targets {
            self.commit(QueueOp::Requeued {
                item_id: item_id.clone(),
                sink: sink.clone(),
            })?;
        }
        Ok(targets)
    }

    /// Write a snapshot now, if anything changed since the last one.
    pub fn flush(&self) -> Result<(), StoreError> {
        self.snapshot(true)
    }

    fn snapshot(&self, force: bool) -> Result<(), StoreError> {
        let _gate = self.gate.write().unwrap();
        let mut core = self.core.lock().unwrap();
        if core.poisoned {
            return Err(StoreError::Poisoned);
        }
        if core.since_snapshot == 0 || (!force && core.since_snapshot < self.snapshot_every) {
            return Ok(());
        }
        let tables = self.tables.read().unwrap();
        let result = (|| -> Result<(), StoreError> {
            for id in &core.dirty {
                if let Some(doc) = tables.get(id) {
                    save_document_with(&doc.lock().unwrap(), &self.dir, self.budget.as_ref(), self.sync_writes)?;
                }
            }
            let snapshot = QueueSnapshot {
                last_seq: core.journal.next_seq() - 1,
                queue: core.queue.clone(),
            };
            let bytes = serde_json::to_vec(&snapshot).map_err(PersistenceError::Codec)?;
            let path = self.dir.join(QUEUE_FILE);
            write_atomic(&path, &bytes, self.budget.as_ref(), self.sync_writes)
                .map_err(|source| PersistenceError::Io { path, source })?;
            core.journal.truncate()?;
            Ok(())
        })();
        match result {
            Ok(()) => {
                debug!(
                    records = core.since_snapshot,
                    tables = core.dirty.len(),
                    "snapshot written"
                );
                core.since_snapshot = 0;
                core.dirty.clear();
                Ok(())
            }
            Err(e) => {
                core.poisoned = true;
                Err(e)
            }
        }
    }

    fn render_payload(&self, payload: &PayloadRef) -> Option<String> {
        let doc = self.doc(payload.table_id()).ok()?;
        let doc = doc.lock().unwrap();
        match payload {
            PayloadRef::Annotation { annotation_id, .. } => doc.annotation_by_id(annotation_id).map(|a| a.text.clone()),
            PayloadRef::Entry { entry_id, .. } => doc.entry_by_id(entry_id).and_then(|e| {
                serde_json::to_string(&EntryPayload {
                    table_id: doc.table_id(),
                    entry: e,
                })
                .ok()
            }),
        }
    }
}

/// What an entry looks like on the wire to a sink.
#[derive(Serialize)]
struct EntryPayload<'a> {
    table_id: &'a TableId,
    #[serde(flatten)]
    entry: &'a Entry,
}

impl QueueHost for Store {
    type Error = StoreError;

    fn read_queue<R>(&self, f: impl FnOnce(&SyncQueue) -> R) -> R {
        f(&self.core.lock().unwrap().queue)
    }

    fn commit(&self, change: QueueOp) -> Result<(), StoreError> {
        {
            let _gate = self.gate.read().unwrap();
            let op = StoreOp::QueueStateChange { change };
            let target = self.read_queue(|q| op.receipt_target(q));
            let doc = target.as_ref().map(|id| self.doc(id)).transpose()?;
            let mut doc = doc.as_ref().map(|d| d.lock().unwrap());
            let mut core = self.core.lock().unwrap();
            let StoreOp::QueueStateChange { change } = &op else {
                unreachable!()
            };
            core.queue.check(change)?;
            self.journal(&mut core, &op)?;
            if let Some(doc) = doc.as_deref_mut() {
                if op.apply_to_doc(doc, &core.queue)? {
                    core.dirty.insert(doc.table_id().clone());
                }
            }
            op.apply_to_queue(&mut core.queue)?;
        }
        self.after_write();
        Ok(())
    }

    fn render(&self, payload: &PayloadRef) -> Option<String> {
        self.render_payload(payload)
    }
}

fn replay_one(
    tables: &mut BTreeMap<TableId, TableDocument>,
    queue: &mut SyncQueue,
    queue_last_seq: u64,
    seq: u64,
    op: &StoreOp,
    dirty: &mut BTreeSet<TableId>,
) -> Result<(), String> {
    if let StoreOp::CreateTable { schema } = op {
        if !tables.contains_key(&schema.table_id) {
            tables.insert(schema.table_id.clone(), TableDocument::new(schema.clone()));
            dirty.insert(schema.table_id.clone());
        }
        return Ok(());
    }
    let target = op.table_id().cloned().or_else(|| op.receipt_target(queue));
    if let Some(id) = target {
        let doc = tables
            .get_mut(&id)
            .ok_or_else(|| format!("table {id} does not exist"))?;
        if op.apply_to_doc(doc, queue).map_err(|e| e.to_string())? {
            dirty.insert(id);
        }
    }
    if matches!(op, StoreOp::QueueStateChange { .. }) && seq <= queue_last_seq {
        return Ok(());
    }
    op.apply_to_queue(queue).map_err(|e| e.to_string())
}

fn load_tables(dir: &Path) -> Result<BTreeMap<TableId, TableDocument>, StoreError> {
    let mut tables = BTreeMap::new();
    let io_err = |source| PersistenceError::Io {
        path: dir.to_owned(),
        source,
    };
    for dirent in fs::read_dir(dir).map_err(io_err)? {
        let path = dirent.map_err(io_err)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("xml") || !path.is_file() {
            continue;
        }
        let src = fs::read_to_string(&path).map_err(|source| PersistenceError::Io {
            path: path.clone(),
            source,
        })?;
        if !is_table_document(&src) {
            continue;
        }
        let doc = from_xml(&src).map_err(|e| e.at_path(&path))?;
        let expected = document_file_name(doc.table_id());
        if path.file_name().and_then(|n| n.to_str()) != Some(expected.as_str()) {
            return Err(PersistenceError::Format {
                line: 1,
                detail: format!("{} holds table {}", path.display(), doc.table_id()),
            }
            .into());
        }
        tables.insert(doc.table_id().clone(), doc);
    }
    Ok(tables)
}

/// Other XML (an exported spreadsheet, say) may share the directory.
fn is_table_document(src: &str) -> bool {
    match xml::parse(src) {
        Ok(root) => root.name == "table",
        // Let the real parse report the error for files that claim to be tables.
        Err(_) => src.contains("<table"),
    }
}

fn load_queue(dir: &Path) -> Result<QueueSnapshot, StoreError> {
    let path = dir.join(QUEUE_FILE);
    match fs::read(&path) {
        Ok(bytes) => Ok(serde_json::from_slice(&bytes).map_err(PersistenceError::Codec)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(QueueSnapshot {
            last_seq: 0,
            queue: SyncQueue::new(),
        }),
        Err(source) => Err(PersistenceError::Io { path, source }.into()),
    }
}

/// Open the store in `dir` just long enough to read its recovered state.
pub fn recover_state(dir: &Path) -> Result<StoreState, StoreError> {
    Ok(Store::open(StoreOptions::new(dir).sync_writes(false))?.state())
}
