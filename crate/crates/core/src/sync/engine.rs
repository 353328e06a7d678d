//! Drives deliveries: one tick probes nothing itself, it takes a
//! connectivity reading and works through what is due at every reachable
//! sink. Sinks run in parallel; within a sink posts are sequential.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::chunk::chunk_for_sink;
use super::connectivity::ConnectivityState;
use super::queue::{AttemptOutcome, ChunkReceipt, DeliveryState, PayloadRef, QueueOp, SyncQueue};
use super::sink::{Post, PostOutcome, Sink, SinkRegistry};
use super::{BackoffPolicy, SyncError};
use crate::model::{ItemId, SinkId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    /// Time between ticks (and connectivity probes) when running as a daemon.
    #[serde(with = "secs")]
    pub tick_interval: Duration,
    pub backoff: BackoffPolicy,
    pub jitter_seed: u64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            tick_interval: Duration::from_secs(30),
            backoff: BackoffPolicy::default(),
            jitter_seed: 0,
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// What the engine needs from the system that owns the queue.
pub trait QueueHost: Sync {
    type Error: From<SyncError> + Send;

    fn read_queue<R>(&self, f: impl FnOnce(&SyncQueue) -> R) -> R;

    /// Make a queue change durable, then apply it.
    fn commit(&self, op: QueueOp) -> Result<(), Self::Error>;

    /// The text to publish for a payload, or `None` if it no longer exists.
    fn render(&self, payload: &PayloadRef) -> Option<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryAttempt {
    pub item_id: ItemId,
    pub sink: SinkId,
    pub author: String,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub outcome: AttemptOutcome,
    pub chunks_posted: u32,
}

impl DeliveryAttempt {
    pub fn delivered(&self) -> bool {
        matches!(self.outcome, AttemptOutcome::Delivered | AttemptOutcome::FoundByLookup)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    /// True when another tick was still running and this one did nothing.
    pub skipped: bool,
    pub attempts: Vec<DeliveryAttempt>,
}

impl TickReport {
    pub fn delivered(&self) -> usize {
        self.attempts.iter().filter(|a| a.delivered()).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkCounts {
    pub pending: usize,
    pub in_flight: usize,
    pub delivered: usize,
    pub failed_permanent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub at: DateTime<Utc>,
    pub sinks: BTreeMap<SinkId, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedDelivery {
    pub item_id: ItemId,
    pub sink: SinkId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncStatus {
    pub sinks: BTreeMap<SinkId, SinkCounts>,
    /// Items with at least one delivery still pending or in flight.
    pub unsettled_items: usize,
    pub oldest_pending_age_secs: Option<i64>,
    pub last_probe: Option<ProbeReport>,
    pub ticks_run: u64,
    pub ticks_skipped: u64,
    pub failed: Vec<FailedDelivery>,
}

impl SyncStatus {
    pub fn total(&self, pick: impl Fn(&SinkCounts) -> usize) -> usize {
        self.sinks.values().map(pick).sum()
    }
}

pub struct SyncEngine {
    sinks: SinkRegistry,
    config: SyncConfig,
    running: AtomicBool,
    ticks_run: AtomicU64,
    ticks_skipped: AtomicU64,
    last_probe: Mutex<Option<ProbeReport>>,
}

struct RunningGuard<'a>(&'a AtomicBool);

impl Drop for RunningGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

impl SyncEngine {
    pub fn new(sinks: SinkRegistry, config: SyncConfig) -> Self {
        SyncEngine {
            sinks,
            config,
            running: AtomicBool::new(false),
            ticks_run: AtomicU64::new(0),
            ticks_skipped: AtomicU64::new(0),
            last_probe: Mutex::new(None),
        }
    }

    pub fn sinks(&self) -> &SinkRegistry {
        &self.sinks
    }

    pub fn config(&self) -> &SyncConfig {
        &self.config
    }

    /// Check a target set before enqueueing.
    pub fn check_targets<'a>(&self, targets: impl IntoIterator<Item = &'a SinkId>) -> Result<(), SyncError> {
        for sink in targets {
            if !self.sinks.contains(sink) {
                return Err(SyncError::UnregisteredSink(sink.clone()));
            }
        }
        Ok(())
    }

    /// Run one tick. Non-reentrant: a tick that starts while another is
    /// running is skipped and counted.
    pub fn tick<H: QueueHost>(
        &self,
        host: &H,
        connectivity: &ConnectivityState,
        now: DateTime<Utc>,
    ) -> Result<TickReport, H::Error> {
        if self
            .running
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .is_err()
        {
            self.ticks_skipped.fetch_add(1, Ordering::SeqCst);
            debug!("sync tick skipped: previous tick still running");
            return Ok(TickReport {
                skipped: true,
                attempts: Vec::new(),
            });
        }
        let _guard = RunningGuard(&self.running);
        self.ticks_run.fetch_add(1, Ordering::SeqCst);
        *self.last_probe.lock().unwrap() = Some(ProbeReport {
            at: now,
            sinks: connectivity.resolve(self.sinks.ids()),
        });

        let up: Vec<(&SinkId, &std::sync::Arc<dyn Sink>)> =
            self.sinks.iter().filter(|(id, _)| connectivity.is_up(id)).collect();
        let run = |(id, sink): &(&SinkId, &std::sync::Arc<dyn Sink>)| self.drain_sink(host, id, sink.as_ref(), now);

        #[cfg(feature = "parallel")]
        let per_sink: Vec<Result<Vec<DeliveryAttempt>, H::Error>> = {
            use rayon::prelude::*;
            up.par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let per_sink: Vec<Result<Vec<DeliveryAttempt>, H::Error>> = up.iter().map(run).collect();

        let mut attempts = Vec::new();
        for r in per_sink {
            attempts.extend(r?);
        }
        Ok(TickReport {
            skipped: false,
            attempts,
        })
    }

    fn drain_sink<H: QueueHost>(
        &self,
        host: &H,
        sink_id: &SinkId,
        sink: &dyn Sink,
        now: DateTime<Utc>,
    ) -> Result<Vec<DeliveryAttempt>, H::Error> {
        let groups = host.read_queue(|q| q.due(sink_id, now));
        let mut attempts = Vec::new();
        for (_author, items) in groups {
            for item_id in items {
                let attempt = self.deliver_to(host, &item_id, sink, now)?;
                let blocked = matches!(
                    attempt.outcome,
                    AttemptOutcome::TransientFailure { .. } | AttemptOutcome::Ambiguous
                );
                attempts.push(attempt);
                // Later items by the same author wait so the sink sees them in order.
                if blocked {
                    break;
                }
            }
        }
        Ok(attempts)
    }

    /// One delivery attempt of `item_id` to `sink_id`.
    pub fn deliver<H: QueueHost>(
        &self,
        host: &H,
        item_id: &ItemId,
        sink_id: &SinkId,
        now: DateTime<Utc>,
    ) -> Result<DeliveryAttempt, H::Error> {
        let sink = self
            .sinks
            .get(sink_id)
            .ok_or_else(|| SyncError::UnregisteredSink(sink_id.clone()))?;
        self.deliver_to(host, item_id, sink.as_ref(), now)
    }

    fn deliver_to<H: QueueHost>(
        &self,
        host: &H,
        item_id: &ItemId,
        sink: &dyn Sink,
        now: DateTime<Utc>,
    ) -> Result<DeliveryAttempt, H::Error> {
        let descriptor = sink.descriptor();
        let sink_id = &descriptor.sink_id;
        let item = host
            .read_queue(|q| q.get(item_id).cloned())
            .ok_or_else(|| SyncError::UnknownItem(item_id.clone()))?;
        let delivery = item
            .deliveries
            .get(sink_id)
            .cloned()
            .ok_or_else(|| SyncError::NotTargeted {
                item: item_id.clone(),
                sink: sink_id.clone(),
            })?;
        let unresolved = delivery.state == DeliveryState::InFlight;
        host.commit(QueueOp::AttemptStarted {
            item_id: item_id.clone(),
            sink: sink_id.clone(),
            at: now,
        })?;

        let key = item.idempotency_key(sink_id);
        let mut acked: BTreeSet<u32> = delivery.acked_chunks.keys().copied().collect();
        let mut new_acks: Vec<ChunkReceipt> = Vec::new();
        let mut posted = 0u32;
        let mut reposted = 0u32;

        let chunks = match host.render(&item.payload_ref) {
            None => Err("payload no longer exists".to_owned()),
            Some(body) => chunk_for_sink(&body, descriptor.max_post_length).map_err(|e| e.to_string()),
        };
        let (outcome, chunk_count) = match chunks {
            Err(reason) => (AttemptOutcome::PermanentFailure { reason }, 0),
            Ok(chunks) => {
                let n = chunks.len() as u32;
                let mut outcome = None;
                if unresolved && descriptor.supports_lookup && (acked.len() as u32) < n {
                    match sink.lookup(&key) {
                        Ok(found) => {
                            for c in found {
                                if (1..=n).contains(&c.chunk_index) && acked.insert(c.chunk_index) {
                                    new_acks.push(c);
                                }
                            }
                            if acked.len() as u32 == n {
                                outcome = Some(AttemptOutcome::FoundByLookup);
                            }
                        }
                        Err(reason) => outcome = Some(AttemptOutcome::TransientFailure { reason }),
                    }
                }
                let mut first_resend = unresolved && !descriptor.supports_lookup;
                if outcome.is_none() {
                    for (i, body) in chunks.into_iter().enumerate() {
                        let index = i as u32 + 1;
                        if acked.contains(&index) {
                            continue;
                        }
                        if first_resend {
                            reposted += 1;
                            first_resend = false;
                        }
                        posted += 1;
                        let post = Post {
                            idempotency_key: key.clone(),
                            chunk_index: index,
                            chunk_count: n,
                            body,
                            author: item.author.clone(),
                            payload_ref: item.payload_ref.clone(),
                            sent_at: now,
                        };
                        match sink.post(&post) {
                            PostOutcome::Ack(receipt) => {
                                acked.insert(index);
                                new_acks.push(ChunkReceipt {
                                    chunk_index: index,
                                    receipt,
                                });
                            }
                            PostOutcome::TransientFailure(reason) => {
                                outcome = Some(AttemptOutcome::TransientFailure { reason });
                                break;
                            }
                            PostOutcome::PermanentFailure(reason) => {
                                outcome = Some(AttemptOutcome::PermanentFailure { reason });
                                break;
                            }
                            PostOutcome::Ambiguous => {
                                outcome = Some(AttemptOutcome::Ambiguous);
                                break;
                            }
                        }
                    }
                }
                (outcome.unwrap_or(AttemptOutcome::Delivered), n)
            }
        };

        let next_attempt_at = match &outcome {
            AttemptOutcome::TransientFailure { .. } | AttemptOutcome::Ambiguous => {
                let failures = delivery.attempts.len() as u32 + 1;
                let delay = self.config.backoff.delay(failures, &key, self.config.jitter_seed);
                Some(now + chrono::Duration::from_std(delay).unwrap_or(chrono::Duration::MAX))
            }
            _ => None,
        };
        if let AttemptOutcome::PermanentFailure { reason } = &outcome {
            warn!(item = %item_id, sink = %sink_id, %reason, "delivery failed permanently");
        }
        host.commit(QueueOp::AttemptFinished {
            item_id: item_id.clone(),
            sink: sink_id.clone(),
            at: now,
            outcome: outcome.clone(),
            chunk_count,
            acked: new_acks,
            reposted,
            next_attempt_at,
        })?;
        Ok(DeliveryAttempt {
            item_id: item_id.clone(),
            sink: sink_id.clone(),
            author: item.author,
            at: now,
            outcome,
            chunks_posted: posted,
        })
    }

    pub fn status(&self, queue: &SyncQueue, now: DateTime<Utc>) -> SyncStatus {
        let mut sinks: BTreeMap<SinkId, SinkCounts> =
            self.sinks.ids().map(|id| (id.clone(), SinkCounts::default())).collect();
        let mut unsettled_items = 0;
        let mut oldest: Option<DateTime<Utc>> = None;
        let mut failed = Vec::new();
        for item in queue.items() {
            let mut unsettled = false;
            for (sink, d) in &item.deliveries {
                let counts = sinks.entry(sink.clone()).or_default();
                match d.state {
                    DeliveryState::Pending => counts.pending += 1,
                    DeliveryState::InFlight => counts.in_flight += 1,
                    DeliveryState::Delivered => counts.delivered += 1,
                    DeliveryState::FailedPermanent => {
                        counts.failed_permanent += 1;
                        let reason = d
                            .attempts
                            .iter()
                            .rev()
                            .find_map(|a| match &a.outcome {
                                AttemptOutcome::PermanentFailure { reason } => Some(reason.clone()),
                                _ => None,
                            })
                            .unwrap_or_default();
                        failed.push(FailedDelivery {
                            item_id: item.item_id.clone(),
                            sink: sink.clone(),
                            reason,
                        });
                    }
                }
                unsettled |= !d.is_terminal();
            }
            if unsettled {
                unsettled_items += 1;
                oldest = Some(oldest.map_or(item.enqueued_at, |o| o.min(item.enqueued_at)));
            }
        }
        SyncStatus {
            sinks,
            unsettled_items,
            oldest_pending_age_secs: oldest.map(|t| (now - t).num_seconds().max(0)),
            last_probe: self.last_probe.lock().unwrap().clone(),
            ticks_run: self.ticks_run.load(Ordering::SeqCst),
            ticks_skipped: self.ticks_skipped.load(Ordering::SeqCst),
            failed,
        }
    }
}
