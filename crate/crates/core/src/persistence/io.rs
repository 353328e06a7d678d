//! File writes that honour an optional crash-injection budget.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

/// Fault-injection hook: the process "dies" once this many bytes have been
/// written. The write that crosses the line persists only its allowed prefix
/// and every later write fails. A rename costs one byte.
#[derive(Debug, Clone)]
pub struct WriteBudget {
    inner: Arc<BudgetInner>,
}

#[derive(Debug)]
struct BudgetInner {
    remaining: AtomicU64,
    consumed: AtomicU64,
    tripped: AtomicBool,
}

impl WriteBudget {
    pub fn bytes(limit: u64) -> Self {
        WriteBudget {
            inner: Arc::new(BudgetInner {
                remaining: AtomicU64::new(limit),
                consumed: AtomicU64::new(0),
                tripped: AtomicBool::new(false),
            }),
        }
    }

    /// Never trips; only counts.
    pub fn unlimited() -> Self {
        Self::bytes(u64::MAX)
    }

    pub fn consumed(&self) -> u64 {
        self.inner.consumed.load(Ordering::SeqCst)
    }

    pub fn tripped(&self) -> bool {
        self.inner.tripped.load(Ordering::SeqCst)
    }

    /// Claim up to `want` bytes; returns how many may be written.
    fn claim(&self, want: u64) -> u64 {
        if self.tripped() {
            return 0;
        }
        let mut granted = 0;
        let _ = self
            .inner
            .remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |left| {
                granted = left.min(want);
                Some(left - granted)
            });
        self.inner.consumed.fetch_add(granted, Ordering::SeqCst);
        if granted < want {
            self.inner.tripped.store(true, Ordering::SeqCst);
        }
        granted
    }
}

pub(crate) fn crash_error() -> io::Error {
    io::Error::other("simulated crash: write budget exhausted")
}

/// `write_all`, cut short if the budget runs out.
pub(crate) fn write_budgeted(file: &mut File, bytes: &[u8], budget: Option<&WriteBudget>) -> io::Result<()> {
    match budget {
        None => file.write_all(bytes),
        Some(budget) => {
            let granted = budget.claim(bytes.len() as u64) as usize;
            file.write_all(&bytes[..granted])?;
            if granted < bytes.len() {
                return Err(crash_error());
            }
            Ok(())
        }
    }
}

/// Renames and truncations cost one byte of budget.
pub(crate) fn charge_metadata_op(budget: Option<&WriteBudget>) -> io::Result<()> {
    match budget {
        Some(b) if b.claim(1) == 0 => Err(crash_error()),
        _ => Ok(()),
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Replace `path` with `bytes` via write-temp-then-rename, so a crash leaves
/// either the old or the new content.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8], budget: Option<&WriteBudget>, sync: bool) -> io::Result<()> {
    let tmp = tmp_path(path);
    {
        let mut file = OpenOptions::new().write(true).create(true).truncate(true).open(&tmp)?;
        write_budgeted(&mut file, bytes, budget)?;
        if sync {
            file.sync_all()?;
        }
    }
    charge_metadata_op(budget)?;
    fs::rename(&tmp, path)?;
    if sync {
        if let Some(dir) = path.parent() {
            // Directory fsync is unsupported on some platforms; best effort.
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_cuts_the_crossing_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f");
        let mut file = File::create(&path).unwrap();
        let budget = WriteBudget::bytes(5);
        write_budgeted(&mut file, b"abc", Some(&budget)).unwrap();
        assert!(write_budgeted(&mut file, b"defg", Some(&budget)).is_err());
        assert!(budget.tripped());
        assert!(write_budgeted(&mut file, b"h", Some(&budget)).is_err());
        assert_eq!(fs::read(&path).unwrap(), b"abcde");
    }

    #[test]
    fn interrupted_atomic_write_keeps_old_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.xml");
        write_atomic(&path, b"old", None, false).unwrap();
        // Enough for the temp file but not the rename.
        let budget = WriteBudget::bytes(3);
        assert!(write_atomic(&path, b"new", Some(&budget), false).is_err());
        assert_eq!(fs::read(&path).unwrap(), b"old");
        write_atomic(&path, b"newer", Some(&WriteBudget::unlimited()), false).unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"newer");
    }
}
