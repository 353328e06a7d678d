use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, TimeZone, Utc};

use super::*;
use crate::model::{AnnotationId, ItemId, SinkId, TableId};

struct MemHost {
    queue: Mutex<SyncQueue>,
    texts: BTreeMap<PayloadRef, String>,
}

impl MemHost {
    fn new() -> Self {
        MemHost {
            queue: Mutex::new(SyncQueue::new()),
            texts: BTreeMap::new(),
        }
    }

    fn add(&mut self, n: usize, author: &str, text: &str, targets: &[SinkId], at: DateTime<Utc>) -> ItemId {
        let payload = PayloadRef::Annotation {
            table_id: TableId::new("t1"),
            annotation_id: AnnotationId::new(format!("a{n}")),
        };
        self.texts.insert(payload.clone(), text.to_owned());
        let mut q = self.queue.lock().unwrap();
        let id = ItemId::new(format!("q{n}"));
        let seq = q.next_enqueue_seq();
        let item = QueueItem::new(id.clone(), payload, targets.iter().cloned(), author, at, seq);
        q.apply(&QueueOp::Enqueued { item }).unwrap();
        id
    }

    fn state(&self, id: &ItemId, sink: &SinkId) -> DeliveryState {
        self.queue.lock().unwrap().get(id).unwrap().state(sink).unwrap()
    }
}

impl QueueHost for MemHost {
    type Error = SyncError;

    fn read_queue<R>(&self, f: impl FnOnce(&SyncQueue) -> R) -> R {
        f(&self.queue.lock().unwrap())
    }

    fn commit(&self, op: QueueOp) -> Result<(), SyncError> {
        self.queue.lock().unwrap().apply(&op)
    }

    fn render(&self, payload: &PayloadRef) -> Option<String> {
        self.texts.get(payload).cloned()
    }
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()
}

fn engine_with(extra: Vec<Arc<MockSink>>) -> (SyncEngine, Arc<MockSink>) {
    let private = Arc::new(MockSink::new(SinkDescriptor::private_db("mem:private")));
    let mut reg = SinkRegistry::new(private.clone()).unwrap();
    for s in extra {
        reg.register(s).unwrap();
    }
    (SyncEngine::new(reg, SyncConfig::default()), private)
}

#[test]
fn offline_tick_attempts_nothing() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    let ids: Vec<_> = (0..5).map(|i| host.add(i, "ana", "note", &[], t0())).collect();
    let report = engine.tick(&host, &ConnectivityState::all_down(), t0()).unwrap();
    assert!(report.attempts.is_empty());
    assert_eq!(private.log_len(), 0);
    for id in &ids {
        assert_eq!(host.state(id, &SinkId::PrivateDb), DeliveryState::Pending);
    }
    let status = engine.status(&host.queue.lock().unwrap(), t0() + Duration::seconds(90));
    assert_eq!(status.sinks[&SinkId::PrivateDb].pending, 5);
    assert_eq!(status.oldest_pending_age_secs, Some(90));
}

#[test]
fn delivery_preserves_enqueue_order() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    for i in 0..5 {
        host.add(i, "ana", &format!("note {i}"), &[], t0() + Duration::seconds(i as i64));
    }
    let report = engine
        .tick(&host, &ConnectivityState::all_up(), t0() + Duration::seconds(10))
        .unwrap();
    assert_eq!(report.delivered(), 5);
    let bodies: Vec<_> = private.log().into_iter().map(|p| p.body).collect();
    assert_eq!(bodies, (0..5).map(|i| format!("note {i}")).collect::<Vec<_>>());
}

#[test]
fn transient_failures_back_off_then_succeed() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    let id = host.add(0, "ana", "note", &[], t0());
    private.script([Scripted::Transient, Scripted::Transient]);
    let mut now = t0();
    let mut attempts = 0;
    for _ in 0..20 {
        attempts += engine
            .tick(&host, &ConnectivityState::all_up(), now)
            .unwrap()
            .attempts
            .len();
        if host.state(&id, &SinkId::PrivateDb) == DeliveryState::Delivered {
            break;
        }
        now += Duration::seconds(30);
    }
    assert_eq!(attempts, 3);
    assert_eq!(private.log_len(), 1);
    let q = host.queue.lock().unwrap();
    assert_eq!(q.get(&id).unwrap().deliveries[&SinkId::PrivateDb].attempts.len(), 3);
}

#[test]
fn backoff_defers_retry() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    host.add(0, "ana", "note", &[], t0());
    private.script([Scripted::Transient]);
    let up = ConnectivityState::all_up();
    assert_eq!(engine.tick(&host, &up, t0()).unwrap().attempts.len(), 1);
    // First delay is 2s ± 20%.
    assert!(engine
        .tick(&host, &up, t0() + Duration::seconds(1))
        .unwrap()
        .attempts
        .is_empty());
    assert_eq!(
        engine
            .tick(&host, &up, t0() + Duration::seconds(3))
            .unwrap()
            .delivered(),
        1
    );
}

#[test]
fn lost_ack_at_lookup_sink_leaves_one_copy() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    let id = host.add(0, "ana", "note", &[], t0());
    private.script([Scripted::LoseAck]);
    let up = ConnectivityState::all_up();
    let r = engine.tick(&host, &up, t0()).unwrap();
    assert_eq!(r.attempts[0].outcome, AttemptOutcome::Ambiguous);
    assert_eq!(host.state(&id, &SinkId::PrivateDb), DeliveryState::InFlight);
    let r = engine.tick(&host, &up, t0() + Duration::seconds(60)).unwrap();
    assert_eq!(r.attempts[0].outcome, AttemptOutcome::FoundByLookup);
    assert_eq!(host.state(&id, &SinkId::PrivateDb), DeliveryState::Delivered);
    assert_eq!(private.log_len(), 1);
    let q = host.queue.lock().unwrap();
    assert_eq!(
        q.get(&id).unwrap().deliveries[&SinkId::PrivateDb]
            .receipt()
            .unwrap()
            .receipt_id,
        "private_db-1"
    );
}

#[test]
fn lost_ack_at_plain_sink_reposts_and_counts() {
    let micro = Arc::new(MockSink::new(SinkDescriptor::public_microblog("mem:micro")));
    let (engine, _) = engine_with(vec![micro.clone()]);
    let mut host = MemHost::new();
    let id = host.add(0, "ana", "note", &[SinkId::PublicMicroblog], t0());
    micro.script([Scripted::LoseAck]);
    let up = ConnectivityState::all_up();
    engine.tick(&host, &up, t0()).unwrap();
    engine.tick(&host, &up, t0() + Duration::seconds(60)).unwrap();
    assert_eq!(host.state(&id, &SinkId::PublicMicroblog), DeliveryState::Delivered);
    assert_eq!(micro.log_len(), 2);
    let q = host.queue.lock().unwrap();
    assert_eq!(
        q.get(&id).unwrap().deliveries[&SinkId::PublicMicroblog].possible_duplicates,
        1
    );
}

#[test]
fn long_public_note_is_chunked_once() {
    let micro = Arc::new(MockSink::new(SinkDescriptor::public_microblog("mem:micro")));
    let (engine, _) = engine_with(vec![micro.clone()]);
    let mut host = MemHost::new();
    let text: String = "abcdefghij ".repeat(30).chars().take(300).collect();
    host.add(0, "ana", &text, &[SinkId::PublicMicroblog], t0());
    engine.tick(&host, &ConnectivityState::all_up(), t0()).unwrap();
    let log = micro.log();
    assert_eq!(log.len(), 3);
    assert!(log.iter().all(|p| p.body.chars().count() <= MICROBLOG_POST_LENGTH));
    let idx: Vec<_> = log.iter().map(|p| (p.chunk_index, p.chunk_count)).collect();
    assert_eq!(idx, vec![(1, 3), (2, 3), (3, 3)]);
    assert_eq!(
        chunk::reassemble(&log.iter().map(|p| p.body.clone()).collect::<Vec<_>>()),
        text
    );
}

#[test]
fn partial_chunk_failure_resumes_missing_chunks() {
    let repo = Arc::new(MockSink::new(SinkDescriptor {
        max_post_length: Some(40),
        ..SinkDescriptor::repository(SinkId::ContextRepo, "mem:ctx")
    }));
    let (engine, _) = engine_with(vec![repo.clone()]);
    let mut host = MemHost::new();
    let id = host.add(0, "ana", &"word ".repeat(20), &[SinkId::ContextRepo], t0());
    repo.script([Scripted::Accept, Scripted::LoseAck]);
    let up = ConnectivityState::all_up();
    engine.tick(&host, &up, t0()).unwrap();
    engine.tick(&host, &up, t0() + Duration::seconds(60)).unwrap();
    assert_eq!(host.state(&id, &SinkId::ContextRepo), DeliveryState::Delivered);
    let log = repo.log();
    let n = log[0].chunk_count as usize;
    assert_eq!(log.len(), n);
    let mut seen: Vec<_> = log.iter().map(|p| p.chunk_index).collect();
    seen.sort();
    assert_eq!(seen, (1..=n as u32).collect::<Vec<_>>());
}

#[test]
fn permanent_rejection_is_reported() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    let bad = host.add(0, "ana", "bad", &[], t0());
    let good = host.add(1, "ana", "good", &[], t0());
    private.script([Scripted::Reject]);
    let r = engine.tick(&host, &ConnectivityState::all_up(), t0()).unwrap();
    assert_eq!(r.attempts.len(), 2);
    assert_eq!(host.state(&bad, &SinkId::PrivateDb), DeliveryState::FailedPermanent);
    assert_eq!(host.state(&good, &SinkId::PrivateDb), DeliveryState::Delivered);
    let status = engine.status(&host.queue.lock().unwrap(), t0());
    assert_eq!(status.sinks[&SinkId::PrivateDb].failed_permanent, 1);
    assert_eq!(status.failed[0].item_id, bad);
    assert_eq!(status.failed[0].reason, "payload rejected");
    assert_eq!(status.unsettled_items, 0);

    host.commit(QueueOp::Requeued {
        item_id: bad.clone(),
        sink: SinkId::PrivateDb,
    })
    .unwrap();
    engine.tick(&host, &ConnectivityState::all_up(), t0()).unwrap();
    assert_eq!(host.state(&bad, &SinkId::PrivateDb), DeliveryState::Delivered);
}

#[test]
fn head_of_line_blocks_same_author_only() {
    let (engine, private) = engine_with(vec![]);
    let mut host = MemHost::new();
    let a1 = host.add(0, "ana", "a1", &[], t0());
    let a2 = host.add(1, "ana", "a2", &[], t0());
    let b1 = host.add(2, "ben", "b1", &[], t0());
    private.script([Scripted::Transient]);
    engine.tick(&host, &ConnectivityState::all_up(), t0()).unwrap();
    assert_eq!(host.state(&a1, &SinkId::PrivateDb), DeliveryState::Pending);
    assert_eq!(host.state(&a2, &SinkId::PrivateDb), DeliveryState::Pending);
    assert_eq!(host.state(&b1, &SinkId::PrivateDb), DeliveryState::Delivered);
    engine
        .tick(&host, &ConnectivityState::all_up(), t0() + Duration::seconds(60))
        .unwrap();
    let bodies: Vec<_> = private.log().into_iter().map(|p| p.body).collect();
    assert_eq!(bodies, ["b1", "a1", "a2"]);
}

#[test]
fn only_reachable_sinks_are_attempted() {
    let micro = Arc::new(MockSink::new(SinkDescriptor::public_microblog("mem:micro")));
    let (engine, private) = engine_with(vec![micro.clone()]);
    let mut host = MemHost::new();
    let id = host.add(0, "ana", "hello", &[SinkId::PublicMicroblog], t0());
    let conn = ConnectivityState::only([SinkId::PrivateDb]);
    engine.tick(&host, &conn, t0()).unwrap();
    assert_eq!(private.log_len(), 1);
    assert_eq!(micro.log_len(), 0);
    assert_eq!(host.state(&id, &SinkId::PublicMicroblog), DeliveryState::Pending);
    let status = engine.status(&host.queue.lock().unwrap(), t0());
    assert!(!status.last_probe.unwrap().sinks[&SinkId::PublicMicroblog]);
}

#[test]
fn unregistered_target_is_refused() {
    let (engine, _) = engine_with(vec![]);
    let err = engine.check_targets([&SinkId::RawRepo]).unwrap_err();
    assert_eq!(err, SyncError::UnregisteredSink(SinkId::RawRepo));
}
