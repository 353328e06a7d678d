use serde::{Deserialize, Serialize};

use crate::model::{Annotation, ColumnSpec, Entry, ModelError, TableDocument, TableId, TableSchema};
use crate::persistence::{JournalOp, OpKind};
use crate::sync::{PayloadRef, QueueItem, QueueOp, SyncError, SyncQueue};

/// One journal record. Entries and annotations carry their queue item so
/// that the write and its enqueue commit together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StoreOp {
    CreateTable {
        schema: TableSchema,
    },
    AddColumn {
        table_id: TableId,
        column: ColumnSpec,
    },
    AddEntry {
        table_id: TableId,
        entry: Entry,
        enqueue: QueueItem,
    },
    Annotate {
        annotation: Annotation,
        enqueue: QueueItem,
    },
    QueueStateChange {
        change: QueueOp,
    },
}

impl JournalOp for StoreOp {
    fn kind(&self) -> OpKind {
        match self {
            StoreOp::CreateTable { .. } => OpKind::CreateTable,
            StoreOp::AddColumn { .. } => OpKind::AddColumn,
            StoreOp::AddEntry { .. } => OpKind::AddEntry,
            StoreOp::Annotate { .. } => OpKind::Annotate,
            StoreOp::QueueStateChange { .. } => OpKind::QueueStateChange,
        }
    }
}

impl StoreOp {
    /// The document this op creates or extends. Receipts are handled by
    /// `receipt_target`.
    pub fn table_id(&self) -> Option<&TableId> {
        match self {
            StoreOp::CreateTable { schema } => Some(&schema.table_id),
            StoreOp::AddColumn { table_id, .. } | StoreOp::AddEntry { table_id, .. } => Some(table_id),
            StoreOp::Annotate { annotation, .. } => Some(annotation.scope.table_id()),
            StoreOp::QueueStateChange { .. } => None,
        }
    }

    /// Table whose annotation receives receipts from this op.
    pub(crate) fn receipt_target(&self, queue: &SyncQueue) -> Option<TableId> {
        let StoreOp::QueueStateChange {
            change: QueueOp::AttemptFinished { item_id, acked, .. },
        } = self
        else {
            return None;
        };
        if acked.is_empty() {
            return None;
        }
        match &queue.get(item_id)?.payload_ref {
            PayloadRef::Annotation { table_id, .. } => Some(table_id.clone()),
            PayloadRef::Entry { .. } => None,
        }
    }

    /// Apply to the owning document. Ops already reflected in the document
    /// are skipped, which makes replay over a newer snapshot safe. Returns
    /// whether anything changed.
    pub(crate) fn apply_to_doc(&self, doc: &mut TableDocument, queue: &SyncQueue) -> Result<bool, ModelError> {
        match self {
            StoreOp::CreateTable { .. } => Ok(false),
            StoreOp::AddColumn { column, .. } => {
                if doc.column(&column.name).is_some() {
                    return Ok(false);
                }
                let added = doc.add_column(&column.name, column.value_type)?;
                if added.added_at_version != column.added_at_version {
                    return Err(ModelError::invariant(
                        "append-only column versions",
                        format!(
                            "column \"{}\" recorded at version {} but lands at {}",
                            column.name, column.added_at_version, added.added_at_version
                        ),
                    ));
                }
                Ok(true)
            }
            StoreOp::AddEntry { entry, .. } => {
                if doc.entry_by_id(&entry.entry_id).is_some() {
                    return Ok(false);
                }
                doc.push_entry(entry.clone())?;
                Ok(true)
            }
            StoreOp::Annotate { annotation, .. } => {
                if doc.annotation_by_id(&annotation.annotation_id).is_some() {
                    return Ok(false);
                }
                doc.push_annotation(annotation.clone())?;
                Ok(true)
            }
            StoreOp::QueueStateChange { change } => {
                let QueueOp::AttemptFinished { item_id, acked, .. } = change else {
                    return Ok(false);
                };
                let Some(PayloadRef::Annotation { annotation_id, .. }) = queue.get(item_id).map(|i| &i.payload_ref)
                else {
                    return Ok(false);
                };
                let Some(annotation) = doc.annotations.iter_mut().find(|a| &a.annotation_id == annotation_id) else {
                    return Err(ModelError::invariant(
                        "queued payload exists",
                        format!("annotation {annotation_id} is not in table {}", doc.table_id()),
                    ));
                };
                let mut changed = false;
                for c in acked {
                    if !annotation.receipts.contains(&c.receipt) {
                        annotation.receipts.push(c.receipt.clone());
                        changed = true;
                    }
                }
                Ok(changed)
            }
        }
    }

    /// Apply to the queue. An embedded enqueue whose item already exists is
    /// skipped.
    pub(crate) fn apply_to_queue(&self, queue: &mut SyncQueue) -> Result<(), SyncError> {
        match self {
            StoreOp::AddEntry { enqueue, .. } | StoreOp::Annotate { enqueue, .. } => {
                if !queue.contains(&enqueue.item_id) {
                    queue.apply(&QueueOp::Enqueued { item: enqueue.clone() })?;
                }
                Ok(())
            }
            StoreOp::QueueStateChange { change } => queue.apply(change),
            StoreOp::CreateTable { .. } | StoreOp::AddColumn { .. } => Ok(()),
        }
    }
}
