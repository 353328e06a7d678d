//! Reference sink: keeps a receive log in memory (optionally mirrored to a
//! newline-delimited JSON file) and misbehaves on a script.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::queue::{ChunkReceipt, PayloadRef};
use super::sink::{Post, PostOutcome, Sink, SinkDescriptor};
use crate::model::Receipt;

/// One post as the sink stored it. This is also the line format of the
/// file-backed variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedPost {
    pub receipt_id: String,
    pub idempotency_key: String,
    pub chunk_index: u32,
    pub chunk_count: u32,
    pub author: String,
    pub payload_ref: PayloadRef,
    pub body: String,
    pub received_at: DateTime<Utc>,
}

/// A forced outcome for the next post.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scripted {
    Accept,
    /// Refuse without storing.
    Transient,
    /// Reject the payload as invalid.
    Reject,
    /// Store the post but lose the acknowledgment.
    LoseAck,
}

/// Random misbehaviour applied once the script runs out.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FaultModel {
    pub transient_probability: f64,
    pub ack_loss_probability: f64,
}

struct State {
    log: Vec<LoggedPost>,
    script: VecDeque<Scripted>,
    faults: FaultModel,
    rng: StdRng,
}

pub struct MockSink {
    descriptor: SinkDescriptor,
    state: Mutex<State>,
    file: Option<PathBuf>,
}

impl MockSink {
    pub fn new(descriptor: SinkDescriptor) -> Self {
        MockSink {
            descriptor,
            state: Mutex::new(State {
                log: Vec::new(),
                script: VecDeque::new(),
                faults: FaultModel::default(),
                rng: StdRng::seed_from_u64(0),
            }),
            file: None,
        }
    }

    /// A sink whose log is appended to `path`, one JSON record per line.
    /// Existing lines are loaded, so lookups survive restarts.
    pub fn file_backed(descriptor: SinkDescriptor, path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let log = match fs::read_to_string(&path) {
            Ok(text) => read_log(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let sink = MockSink::new(descriptor);
        sink.state.lock().unwrap().log = log;
        Ok(MockSink {
            file: Some(path),
            ..sink
        })
    }

    pub fn with_faults(self, faults: FaultModel, seed: u64) -> Self {
        {
            let mut s = self.state.lock().unwrap();
            s.faults = faults;
            s.rng = StdRng::seed_from_u64(seed);
        }
        self
    }

    pub fn script(&self, outcomes: impl IntoIterator<Item = Scripted>) {
        self.state.lock().unwrap().script.extend(outcomes);
    }

    pub fn log(&self) -> Vec<LoggedPost> {
        self.state.lock().unwrap().log.clone()
    }

    pub fn log_len(&self) -> usize {
        self.state.lock().unwrap().log.len()
    }

    pub fn file(&self) -> Option<&Path> {
        self.file.as_deref()
    }

    fn append_to_file(&self, post: &LoggedPost) -> io::Result<()> {
        let Some(path) = &self.file else { return Ok(()) };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut line = serde_json::to_string(post).map_err(io::Error::other)?;
        line.push('\n');
        f.write_all(line.as_bytes())
    }
}

/// Parse a file-backed sink log.
pub fn read_log(text: &str) -> io::Result<Vec<LoggedPost>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}

impl Sink for MockSink {
    fn descriptor(&self) -> &SinkDescriptor {
        &self.descriptor
    }

    fn post(&self, post: &Post) -> PostOutcome {
        if let Some(limit) = self.descriptor.max_post_length {
            let chars = post.body.chars().count();
            if chars > limit {
                return PostOutcome::PermanentFailure(format!("post of {chars} characters exceeds {limit}"));
            }
        }
        let mut s = self.state.lock().unwrap();
        let action = match s.script.pop_front() {
            Some(a) => a,
            None => {
                let faults = s.faults;
                if s.rng.gen_bool(faults.transient_probability.clamp(0.0, 1.0)) {
                    Scripted::Transient
                } else if s.rng.gen_bool(faults.ack_loss_probability.clamp(0.0, 1.0)) {
                    Scripted::LoseAck
                } else {
                    Scripted::Accept
                }
            }
        };
        match action {
            Scripted::Transient => PostOutcome::TransientFailure("sink unavailable".into()),
            Scripted::Reject => PostOutcome::PermanentFailure("payload rejected".into()),
            Scripted::Accept | Scripted::LoseAck => {
                let logged = LoggedPost {
                    receipt_id: format!("{}-{}", self.descriptor.sink_id, s.log.len() + 1),
                    idempotency_key: post.idempotency_key.clone(),
                    chunk_index: post.chunk_index,
                    chunk_count: post.chunk_count,
                    author: post.author.clone(),
                    payload_ref: post.payload_ref.clone(),
                    body: post.body.clone(),
                    received_at: post.sent_at,
                };
                if let Err(e) = self.append_to_file(&logged) {
                    return PostOutcome::TransientFailure(format!("sink log write failed: {e}"));
                }
                let receipt = Receipt {
                    sink: self.descriptor.sink_id.clone(),
                    receipt_id: logged.receipt_id.clone(),
                    at: logged.received_at,
                };
                s.log.push(logged);
                if action == Scripted::LoseAck {
                    PostOutcome::Ambiguous
                } else {
                    PostOutcome::Ack(receipt)
                }
            }
        }
    }

    fn lookup(&self, idempotency_key: &str) -> Result<Vec<ChunkReceipt>, String> {
        if !self.descriptor.supports_lookup {
            return Err(format!("{} does not support lookup", self.descriptor.sink_id));
        }
        let s = self.state.lock().unwrap();
        let mut first: BTreeMap<u32, ChunkReceipt> = BTreeMap::new();
        for p in s.log.iter().filter(|p| p.idempotency_key == idempotency_key) {
            first.entry(p.chunk_index).or_insert_with(|| ChunkReceipt {
                chunk_index: p.chunk_index,
                receipt: Receipt {
                    sink: self.descriptor.sink_id.clone(),
                    receipt_id: p.receipt_id.clone(),
                    at: p.received_at,
                },
            });
        }
        Ok(first.into_values().collect())
    }
}
