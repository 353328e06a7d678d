//! Write-ahead journal.
//!
//! On disk each record is `len: u32 LE | payload: len bytes | crc32(payload): u32 LE`.
//! The payload is a JSON envelope `{"record_seq", "op_kind", "payload"}`.
//! Sequence numbers increase by one with no gaps inside a file.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::io::{charge_metadata_op, write_budgeted, WriteBudget};
use super::PersistenceError;

pub const JOURNAL_FILE: &str = "journal.log";

/// Upper bound on a single record; anything larger is treated as a corrupt
/// length prefix.
const MAX_RECORD_LEN: u32 = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    CreateTable,
    AddColumn,
    AddEntry,
    Annotate,
    QueueStateChange,
}

/// Implemented by whatever gets journaled.
pub trait JournalOp: Serialize + DeserializeOwned {
    fn kind(&self) -> OpKind;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord<T> {
    pub record_seq: u64,
    pub op_kind: OpKind,
    pub payload: T,
}

/// How a replay stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayEnd {
    Clean,
    /// The last record was incomplete or failed its checksum. It was never
    /// committed and is dropped.
    TornTail {
        offset: u64,
    },
    /// A bad record with valid records after it. Replay stops at `offset`.
    Corrupt {
        offset: u64,
        reason: String,
    },
}

#[derive(Debug)]
pub struct Replay<T> {
    pub records: Vec<JournalRecord<T>>,
    pub end: ReplayEnd,
    /// Bytes covered by the committed records.
    pub valid_len: u64,
}

impl<T> Replay<T> {
    pub fn last_seq(&self) -> Option<u64> {
        self.records.last().map(|r| r.record_seq)
    }
}

enum Frame<'a> {
    Complete {
        payload: &'a [u8],
        crc_ok: bool,
        len: usize,
    },
    Incomplete,
}

fn read_frame(buf: &[u8]) -> Frame<'_> {
    if buf.len() < 4 {
        return Frame::Incomplete;
    }
    let len = u32::from_le_bytes(buf[..4].try_into().unwrap());
    if len > MAX_RECORD_LEN || buf.len() < 8 + len as usize {
        return Frame::Incomplete;
    }
    let len = len as usize;
    let payload = &buf[4..4 + len];
    let stored = u32::from_le_bytes(buf[4 + len..8 + len].try_into().unwrap());
    Frame::Complete {
        payload,
        crc_ok: crc32fast::hash(payload) == stored,
        len: 8 + len,
    }
}

fn decode_record<T: DeserializeOwned>(payload: &[u8]) -> Result<JournalRecord<T>, String> {
    serde_json::from_slice(payload).map_err(|e| e.to_string())
}

/// Decode a journal image. Never fails: problems are reported in
/// [`Replay::end`].
pub fn decode<T: JournalOp>(bytes: &[u8]) -> Replay<T> {
    let mut records: Vec<JournalRecord<T>> = Vec::new();
    let mut offset = 0usize;
    let end = loop {
        if offset == bytes.len() {
            break ReplayEnd::Clean;
        }
        let rest = &bytes[offset..];
        let bad = |reason: String| {
            // A damaged record is only a torn tail if nothing valid follows it.
            let followed_by_valid = match read_frame(rest) {
                Frame::Complete { len, .. } => matches!(read_frame(&rest[len..]), Frame::Complete { crc_ok: true, .. }),
                Frame::Incomplete => false,
            };
            if followed_by_valid {
                ReplayEnd::Corrupt {
                    offset: offset as u64,
                    reason,
                }
            } else {
                ReplayEnd::TornTail { offset: offset as u64 }
            }
        };
        match read_frame(rest) {
            Frame::Incomplete => break ReplayEnd::TornTail { offset: offset as u64 },
            Frame::Complete { crc_ok: false, .. } => break bad("checksum mismatch".into()),
            Frame::Complete {
                payload,
                len,
                crc_ok: true,
            } => {
                let record = match decode_record::<T>(payload) {
                    Ok(r) => r,
                    Err(e) => {
                        break ReplayEnd::Corrupt {
                            offset: offset as u64,
                            reason: format!("undecodable record: {e}"),
                        }
                    }
                };
                if let Some(prev) = records.last() {
                    if record.record_seq != prev.record_seq + 1 {
                        break ReplayEnd::Corrupt {
                            offset: offset as u64,
                            reason: format!("record_seq {} follows {}", record.record_seq, prev.record_seq),
                        };
                    }
                }
                records.push(record);
                offset += len;
            }
        }
    };
    let valid_len = match &end {
        ReplayEnd::Clean => bytes.len() as u64,
        ReplayEnd::TornTail { offset } | ReplayEnd::Corrupt { offset, .. } => *offset,
    };
    Replay {
        records,
        end,
        valid_len,
    }
}

/// Read and decode the journal at `path`. A missing file is an empty journal.
pub fn replay<T: JournalOp>(path: &Path) -> Result<Replay<T>, PersistenceError> {
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes).map_err(|source| PersistenceError::Io {
                path: path.to_owned(),
                source,
            })?;
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(source) => {
            return Err(PersistenceError::Io {
                path: path.to_owned(),
                source,
            })
        }
    }
    Ok(decode(&bytes))
}

/// Frame one record for disk.
pub fn encode<T: JournalOp>(record_seq: u64, op: &T) -> Result<Vec<u8>, PersistenceError> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        record_seq: u64,
        op_kind: OpKind,
        payload: &'a T,
    }
    let payload = serde_json::to_vec(&Envelope {
        record_seq,
        op_kind: op.kind(),
        payload: op,
    })?;
    let mut frame = Vec::with_capacity(payload.len() + 8);
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(&payload);
    frame.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(frame)
}

#[derive(Debug, Clone, Default)]
pub struct JournalOptions {
    /// fsync after every append.
    pub sync: bool,
    pub budget: Option<WriteBudget>,
}

/// Single appender over `journal.log`.
#[derive(Debug)]
pub struct Journal<T> {
    path: PathBuf,
    file: File,
    next_seq: u64,
    options: JournalOptions,
    poisoned: bool,
    _op: PhantomData<fn(T)>,
}

impl<T: JournalOp> Journal<T> {
    /// Open for appending, replaying what is there. A torn tail is cut off;
    /// mid-journal corruption refuses to open.
    pub fn open(path: &Path, options: JournalOptions) -> Result<(Self, Replay<T>), PersistenceError> {
        let replay = replay::<T>(path)?;
        if let ReplayEnd::Corrupt { offset, reason } = &replay.end {
            return Err(PersistenceError::JournalCorrupt {
                path: path.to_owned(),
                offset: *offset,
                last_good_seq: replay.last_seq(),
                reason: reason.clone(),
            });
        }
        let io_err = |source| PersistenceError::Io {
            path: path.to_owned(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .map_err(io_err)?;
        file.set_len(replay.valid_len).map_err(io_err)?;
        file.seek(SeekFrom::End(0)).map_err(io_err)?;
        let next_seq = replay.last_seq().map_or(1, |s| s + 1);
        Ok((
            Journal {
                path: path.to_owned(),
                file,
                next_seq,
                options,
                poisoned: false,
                _op: PhantomData,
            },
            replay,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Raise the next sequence number (after loading a snapshot that covers
    /// later records than the journal holds).
    pub fn advance_to(&mut self, next_seq: u64) {
        self.next_seq = self.next_seq.max(next_seq);
    }

    /// Append and (optionally) fsync. The record is committed once this
    /// returns `Ok`.
    pub fn append(&mut self, op: &T) -> Result<u64, PersistenceError> {
        if self.poisoned {
            return Err(PersistenceError::Poisoned);
        }
        let seq = self.next_seq;
        let frame = encode(seq, op)?;
        let io_err = |source| PersistenceError::Io {
            path: self.path.clone(),
            source,
        };
        if let Err(e) = write_budgeted(&mut self.file, &frame, self.options.budget.as_ref()) {
            self.poisoned = true;
            return Err(io_err(e));
        }
        if self.options.sync {
            if let Err(e) = self.file.sync_data() {
                self.poisoned = true;
                return Err(io_err(e));
            }
        }
        self.next_seq += 1;
        Ok(seq)
    }

    /// Drop every record (after a snapshot has made them redundant). Sequence
    /// numbering continues.
    pub fn truncate(&mut self) -> Result<(), PersistenceError> {
        if self.poisoned {
            return Err(PersistenceError::Poisoned);
        }
        if charge_metadata_op(self.options.budget.as_ref()).is_err() {
            self.poisoned = true;
            return Err(PersistenceError::Poisoned);
        }
        let io_err = |source| PersistenceError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.set_len(0).map_err(io_err)?;
        self.file.seek(SeekFrom::Start(0)).map_err(io_err)?;
        if self.options.sync {
            self.file.sync_all().map_err(io_err)?;
        }
        Ok(())
    }
}
