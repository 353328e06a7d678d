//! The sink adapter contract and the registry of configured sinks.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::queue::{ChunkReceipt, PayloadRef};
use super::SyncError;
use crate::model::{Receipt, SinkId};

/// Default post length limit of the public microblog.
pub const MICROBLOG_POST_LENGTH: usize = 140;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkDescriptor {
    pub sink_id: SinkId,
    /// Characters per post; `None` means unlimited.
    #[serde(default)]
    pub max_post_length: Option<usize>,
    /// Whether the sink can be asked which posts it holds for a key.
    #[serde(default)]
    pub supports_lookup: bool,
    /// Opaque address handed to the adapter.
    #[serde(default)]
    pub endpoint: String,
}

impl SinkDescriptor {
    pub fn private_db(endpoint: impl Into<String>) -> Self {
        SinkDescriptor {
            sink_id: SinkId::PrivateDb,
            max_post_length: None,
            supports_lookup: true,
            endpoint: endpoint.into(),
        }
    }

    pub fn public_microblog(endpoint: impl Into<String>) -> Self {
        SinkDescriptor {
            sink_id: SinkId::PublicMicroblog,
            max_post_length: Some(MICROBLOG_POST_LENGTH),
            supports_lookup: false,
            endpoint: endpoint.into(),
        }
    }

    pub fn repository(sink_id: SinkId, endpoint: impl Into<String>) -> Self {
        SinkDescriptor {
            sink_id,
            max_post_length: None,
            supports_lookup: true,
            endpoint: endpoint.into(),
        }
    }
}

/// One post handed to a sink. A long payload becomes several posts sharing
/// an idempotency key, told apart by `chunk_index` (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub idempotency_key: String,
    pub chunk_index: u32,
    pub chunk_count: u32,
    pub body: String,
    pub author: String,
    pub payload_ref: PayloadRef,
    pub sent_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PostOutcome {
    Ack(Receipt),
    /// Worth retrying later.
    TransientFailure(String),
    /// The sink rejected the payload itself; retrying cannot help.
    PermanentFailure(String),
    /// No acknowledgment arrived; the post may or may not have landed.
    Ambiguous,
}

/// Adapter for one publication target. Implementations are called from the
/// sync worker and must be shareable across threads; calls for one sink are
/// never concurrent.
pub trait Sink: Send + Sync {
    fn descriptor(&self) -> &SinkDescriptor;

    fn post(&self, post: &Post) -> PostOutcome;

    /// Posts already stored under `idempotency_key`. Only called when the
    /// descriptor sets `supports_lookup`.
    fn lookup(&self, idempotency_key: &str) -> Result<Vec<ChunkReceipt>, String> {
        let _ = idempotency_key;
        Err(format!("{} does not support lookup", self.descriptor().sink_id))
    }
}

/// The configured sinks. `private_db` is always present and unlimited.
#[derive(Clone)]
pub struct SinkRegistry {
    sinks: BTreeMap<SinkId, Arc<dyn Sink>>,
}

impl fmt::Debug for SinkRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.sinks.values().map(|s| s.descriptor()))
            .finish()
    }
}

impl SinkRegistry {
    pub fn new(private_db: Arc<dyn Sink>) -> Result<Self, SyncError> {
        let d = private_db.descriptor();
        if d.sink_id != SinkId::PrivateDb {
            return Err(SyncError::Registry(format!(
                "registry must be seeded with private_db, got {}",
                d.sink_id
            )));
        }
        if d.max_post_length.is_some() {
            return Err(SyncError::Registry("private_db cannot have a post length limit".into()));
        }
        Ok(SinkRegistry {
            sinks: BTreeMap::from([(SinkId::PrivateDb, private_db)]),
        })
    }

    pub fn register(&mut self, sink: Arc<dyn Sink>) -> Result<(), SyncError> {
        let d = sink.descriptor();
        if d.sink_id == SinkId::PrivateDb {
            return Err(SyncError::Registry("private_db is already registered".into()));
        }
        if let Some(limit) = d.max_post_length {
            super::chunk::part_count(0, limit).map_err(|e| SyncError::Registry(e.to_string()))?;
        }
        if self.sinks.contains_key(&d.sink_id) {
            return Err(SyncError::Registry(format!("{} registered twice", d.sink_id)));
        }
        self.sinks.insert(d.sink_id.clone(), sink);
        Ok(())
    }

    pub fn with(mut self, sink: Arc<dyn Sink>) -> Result<Self, SyncError> {
        self.register(sink)?;
        Ok(self)
    }

    pub fn get(&self, id: &SinkId) -> Option<&Arc<dyn Sink>> {
        self.sinks.get(id)
    }

    pub fn contains(&self, id: &SinkId) -> bool {
        self.sinks.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &SinkId> {
        self.sinks.keys()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &SinkDescriptor> {
        self.sinks.values().map(|s| s.descriptor())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SinkId, &Arc<dyn Sink>)> {
        self.sinks.iter()
    }
}
