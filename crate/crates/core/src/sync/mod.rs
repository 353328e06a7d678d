//! Store-and-forward delivery of entries and annotations to their sinks.

mod backoff;
pub mod chunk;
pub mod connectivity;
mod engine;
pub mod mock;
pub mod queue;
pub mod sink;

use thiserror::Error;

pub use backoff::BackoffPolicy;
pub use chunk::{chunk_for_sink, part_count, ChunkError};
pub use connectivity::{
    ConnectivityProbe, ConnectivityState, RandomConnectivity, ScriptedConnectivity, SharedConnectivity,
};
pub use engine::{
    DeliveryAttempt, FailedDelivery, ProbeReport, QueueHost, SinkCounts, SyncConfig, SyncEngine, SyncStatus, TickReport,
};
pub use mock::{FaultModel, LoggedPost, MockSink, Scripted};
pub use queue::{
    Attempt, AttemptOutcome, ChunkReceipt, DeliveryState, PayloadRef, QueueItem, QueueOp, SinkDelivery, SyncQueue,
};
pub use sink::{Post, PostOutcome, Sink, SinkDescriptor, SinkRegistry, MICROBLOG_POST_LENGTH};

use crate::model::{ItemId, SinkId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyncError {
    #[error("sink {0} is not registered")]
    UnregisteredSink(SinkId),
    #[error("{sink} does not accept {payload}")]
    SinkNotAllowed { sink: SinkId, payload: &'static str },
    #[error("unknown queue item {0}")]
    UnknownItem(ItemId),
    #[error("queue item {0} already exists")]
    DuplicateItem(ItemId),
    #[error("item {item} does not target {sink}")]
    NotTargeted { item: ItemId, sink: SinkId },
    #[error("item {item} at {sink}: cannot {action} from {from:?}")]
    InvalidTransition {
        item: ItemId,
        sink: SinkId,
        from: DeliveryState,
        action: &'static str,
    },
    #[error("sink registry: {0}")]
    Registry(String),
    #[error("connectivity script line {line}: {message}")]
    Script { line: usize, message: String },
}

#[cfg(test)]
mod tests;
