//! The outbound queue as a deterministic state machine. Every change is a
//! [`QueueOp`]; the live system and journal replay apply the same ops.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::SyncError;
use crate::model::{AnnotationId, EntryId, ItemId, Receipt, SinkId, TableId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayloadRef {
    Entry {
        table_id: TableId,
        entry_id: EntryId,
    },
    Annotation {
        table_id: TableId,
        annotation_id: AnnotationId,
    },
}

impl PayloadRef {
    pub fn table_id(&self) -> &TableId {
        match self {
            PayloadRef::Entry { table_id, .. } | PayloadRef::Annotation { table_id, .. } => table_id,
        }
    }

    pub fn is_annotation(&self) -> bool {
        matches!(self, PayloadRef::Annotation { .. })
    }

    /// Deterministic per-(payload, sink) key, stable across retries and
    /// restarts.
    pub fn idempotency_key(&self, sink: &SinkId) -> String {
        match self {
            PayloadRef::Entry { table_id, entry_id } => format!("{table_id}/entry/{entry_id}@{sink}"),
            PayloadRef::Annotation {
                table_id,
                annotation_id,
            } => format!("{table_id}/annotation/{annotation_id}@{sink}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryState {
    Pending,
    /// An attempt started and its result is not known: either it is running
    /// or the sink never acknowledged it.
    InFlight,
    Delivered,
    FailedPermanent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Delivered,
    /// A lookup showed the sink already held every part; nothing was re-sent.
    FoundByLookup,
    TransientFailure {
        reason: String,
    },
    PermanentFailure {
        reason: String,
    },
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkReceipt {
    pub chunk_index: u32,
    pub receipt: Receipt,
}

/// Delivery progress of one item at one sink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkDelivery {
    pub state: DeliveryState,
    pub attempts: Vec<Attempt>,
    pub next_attempt_at: Option<DateTime<Utc>>,
    pub chunk_count: Option<u32>,
    /// First receipt per acknowledged chunk.
    pub acked_chunks: BTreeMap<u32, Receipt>,
    /// Chunks sent again after an unacknowledged attempt at a sink without
    /// lookup. Each may be a duplicate at the sink.
    pub possible_duplicates: u32,
}

impl SinkDelivery {
    fn new() -> Self {
        SinkDelivery {
            state: DeliveryState::Pending,
            attempts: Vec::new(),
            next_attempt_at: None,
            chunk_count: None,
            acked_chunks: BTreeMap::new(),
            possible_duplicates: 0,
        }
    }

    /// Receipt of the first post, once delivered.
    pub fn receipt(&self) -> Option<&Receipt> {
        if self.state == DeliveryState::Delivered {
            self.acked_chunks.values().next()
        } else {
            None
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.state, DeliveryState::Delivered | DeliveryState::FailedPermanent)
    }
}

/// A sync envelope: one entry or annotation bound for a set of sinks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueItem {
    pub item_id: ItemId,
    pub payload_ref: PayloadRef,
    pub author: String,
    pub enqueued_at: DateTime<Utc>,
    /// Position in enqueue order; breaks `enqueued_at` ties.
    pub enqueue_seq: u64,
    pub deliveries: BTreeMap<SinkId, SinkDelivery>,
}

impl QueueItem {
    /// A fresh item with every target pending. `private_db` is always added.
    pub fn new(
        item_id: ItemId,
        payload_ref: PayloadRef,
        targets: impl IntoIterator<Item = SinkId>,
        author: impl Into<String>,
        enqueued_at: DateTime<Utc>,
        enqueue_seq: u64,
    ) -> Self {
        let mut deliveries: BTreeMap<SinkId, SinkDelivery> =
            targets.into_iter().map(|s| (s, SinkDelivery::new())).collect();
        deliveries.entry(SinkId::PrivateDb).or_insert_with(SinkDelivery::new);
        QueueItem {
            item_id,
            payload_ref,
            author: author.into(),
            enqueued_at,
            enqueue_seq,
            deliveries,
        }
    }

    pub fn target_sinks(&self) -> impl Iterator<Item = &SinkId> {
        self.deliveries.keys()
    }

    pub fn idempotency_key(&self, sink: &SinkId) -> String {
        self.payload_ref.idempotency_key(sink)
    }

    pub fn state(&self, sink: &SinkId) -> Option<DeliveryState> {
        self.deliveries.get(sink).map(|d| d.state)
    }

    pub fn is_settled(&self) -> bool {
        self.deliveries.values().all(SinkDelivery::is_terminal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum QueueOp {
    Enqueued {
        item: QueueItem,
    },
    /// pending (or unresolved in-flight) → in_flight.
    AttemptStarted {
        item_id: ItemId,
        sink: SinkId,
        at: DateTime<Utc>,
    },
    AttemptFinished {
        item_id: ItemId,
        sink: SinkId,
        at: DateTime<Utc>,
        outcome: AttemptOutcome,
        chunk_count: u32,
        /// Chunks newly confirmed by this attempt (posted or found by lookup).
        acked: Vec<ChunkReceipt>,
        reposted: u32,
        next_attempt_at: Option<DateTime<Utc>>,
    },
    /// failed_permanent → pending.
    Requeued {
        item_id: ItemId,
        sink: SinkId,
    },
}

impl QueueOp {
    pub fn item_id(&self) -> &ItemId {
        match self {
            QueueOp::Enqueued { item } => &item.item_id,
            QueueOp::AttemptStarted { item_id, .. }
            | QueueOp::AttemptFinished { item_id, .. }
            | QueueOp::Requeued { item_id, .. } => item_id,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncQueue {
    items: BTreeMap<ItemId, QueueItem>,
    next_enqueue_seq: u64,
}

impl SyncQueue {
    pub fn new() -> Self {
        SyncQueue {
            items: BTreeMap::new(),
            next_enqueue_seq: 1,
        }
    }

    pub fn next_enqueue_seq(&self) -> u64 {
        self.next_enqueue_seq.max(1)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &ItemId) -> Option<&QueueItem> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.items.contains_key(id)
    }

    /// Items in enqueue order.
    pub fn items(&self) -> Vec<&QueueItem> {
        let mut v: Vec<&QueueItem> = self.items.values().collect();
        v.sort_by_key(|i| (i.enqueued_at, i.enqueue_seq));
        v
    }

    pub fn item_for_payload(&self, payload: &PayloadRef) -> Option<&QueueItem> {
        self.items.values().find(|i| &i.payload_ref == payload)
    }

    fn delivery_mut(&mut self, item_id: &ItemId, sink: &SinkId) -> Result<&mut SinkDelivery, SyncError> {
        self.items
            .get_mut(item_id)
            .ok_or_else(|| SyncError::UnknownItem(item_id.clone()))?
            .deliveries
            .get_mut(sink)
            .ok_or_else(|| SyncError::NotTargeted {
                item: item_id.clone(),
                sink: sink.clone(),
            })
    }

    /// Whether `apply` would accept `op`, without changing anything.
    pub fn check(&self, op: &QueueOp) -> Result<(), SyncError> {
        let mut scratch = SyncQueue::new();
        if let Some(item) = self.items.get(op.item_id()) {
            scratch.items.insert(item.item_id.clone(), item.clone());
        }
        scratch.apply(op)
    }

    /// Apply one change, enforcing the state machine.
    pub fn apply(&mut self, op: &QueueOp) -> Result<(), SyncError> {
        match op {
            QueueOp::Enqueued { item } => {
                if self.items.contains_key(&item.item_id) {
                    return Err(SyncError::DuplicateItem(item.item_id.clone()));
                }
                if !item.deliveries.contains_key(&SinkId::PrivateDb) {
                    return Err(SyncError::Registry("every item must target private_db".into()));
                }
                self.next_enqueue_seq = self.next_enqueue_seq().max(item.enqueue_seq + 1);
                self.items.insert(item.item_id.clone(), item.clone());
            }
            QueueOp::AttemptStarted { item_id, sink, .. } => {
                let d = self.delivery_mut(item_id, sink)?;
                match d.state {
                    DeliveryState::Pending | DeliveryState::InFlight => d.state = DeliveryState::InFlight,
                    from => return Err(invalid(item_id, sink, from, "start an attempt")),
                }
            }
            QueueOp::AttemptFinished {
                item_id,
                sink,
                at,
                outcome,
                chunk_count,
                acked,
                reposted,
                next_attempt_at,
            } => {
                let d = self.delivery_mut(item_id, sink)?;
                if d.state != DeliveryState::InFlight {
                    return Err(invalid(item_id, sink, d.state, "finish an attempt"));
                }
                d.attempts.push(Attempt {
                    at: *at,
                    outcome: outcome.clone(),
                });
                d.chunk_count = Some(*chunk_count);
                for c in acked {
                    d.acked_chunks.entry(c.chunk_index).or_insert_with(|| c.receipt.clone());
                }
                d.possible_duplicates += reposted;
                d.next_attempt_at = *next_attempt_at;
                d.state = match outcome {
                    AttemptOutcome::Delivered | AttemptOutcome::FoundByLookup => {
                        d.next_attempt_at = None;
                        DeliveryState::Delivered
                    }
                    AttemptOutcome::TransientFailure { .. } => DeliveryState::Pending,
                    AttemptOutcome::PermanentFailure { .. } => DeliveryState::FailedPermanent,
                    AttemptOutcome::Ambiguous => DeliveryState::InFlight,
                };
            }
            QueueOp::Requeued { item_id, sink } => {
                let d = self.delivery_mut(item_id, sink)?;
                if d.state != DeliveryState::FailedPermanent {
                    return Err(invalid(item_id, sink, d.state, "requeue"));
                }
                d.state = DeliveryState::Pending;
                d.next_attempt_at = None;
            }
        }
        Ok(())
    }

    /// What to attempt at `sink` now, grouped by author. Within a group items
    /// are in enqueue order, starting at the author's oldest unsettled item;
    /// an author whose oldest unsettled item is backing off gets nothing.
    pub fn due(&self, sink: &SinkId, now: DateTime<Utc>) -> Vec<(String, Vec<ItemId>)> {
        let mut groups: Vec<(String, Vec<ItemId>)> = Vec::new();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut closed: HashSet<&str> = HashSet::new();
        for item in self.items() {
            let Some(d) = item.deliveries.get(sink) else { continue };
            if d.is_terminal() || closed.contains(item.author.as_str()) {
                continue;
            }
            if d.next_attempt_at.is_some_and(|t| t > now) {
                closed.insert(&item.author);
                continue;
            }
            let slot = *index.entry(&item.author).or_insert_with(|| {
                groups.push((item.author.clone(), Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(item.item_id.clone());
        }
        groups
    }
}

fn invalid(item: &ItemId, sink: &SinkId, from: DeliveryState, action: &'static str) -> SyncError {
    SyncError::InvalidTransition {
        item: item.clone(),
        sink: sink.clone(),
        from,
        action,
    }
}
