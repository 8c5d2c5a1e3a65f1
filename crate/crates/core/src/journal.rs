//! The append-only journal every module persists through.
//!
//! On-disk framing, repeated until end of file:
//!
//! ```text
//! u32 BE length | entry bytes (JSON) | u32 BE CRC-32 of the entry bytes
//! ```
//!
//! Entry bytes are `{"written_at": ..., "entry_type": ..., "payload": ...}`.
//! Each mutation of module state is written as the full new version of the
//! affected record, so replaying the entries in order rebuilds state exactly.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::audit::AuditEntry;
use crate::auth::{AuthSession, OneTimeToken};
use crate::identity::{CredentialRecord, StaffIdentity, StaffNumber};
use crate::mail::MailMessage;
use crate::vault::SealedRecord;

/// Upper bound on one entry; a sealed 16 MiB document is ~22 MiB as base64.
pub const MAX_ENTRY_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryType {
    Identity,
    Mailbox,
    MailMessage,
    Token,
    Session,
    SealedRecord,
    Audit,
    Tombstone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MailboxRecord {
    pub email: String,
    pub credential: CredentialRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MailMessageRecord {
    pub email: String,
    pub message: MailMessage,
}

/// Marks the master key as destroyed. At most one per journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tombstone {
    pub revoked_at: DateTime<Utc>,
    pub revoked_by: StaffNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "entry_type", content = "payload")]
pub enum Record {
    Identity(StaffIdentity),
    Mailbox(MailboxRecord),
    MailMessage(MailMessageRecord),
    Token(OneTimeToken),
    Session(AuthSession),
    SealedRecord(SealedRecord),
    Audit(AuditEntry),
    Tombstone(Tombstone),
}

impl Record {
    pub fn entry_type(&self) -> EntryType {
        match self {
            Record::Identity(_) => EntryType::Identity,
            Record::Mailbox(_) => EntryType::Mailbox,
            Record::MailMessage(_) => EntryType::MailMessage,
            Record::Token(_) => EntryType::Token,
            Record::Session(_) => EntryType::Session,
            Record::SealedRecord(_) => EntryType::SealedRecord,
            Record::Audit(_) => EntryType::Audit,
            Record::Tombstone(_) => EntryType::Tombstone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub written_at: DateTime<Utc>,
    #[serde(flatten)]
    pub record: Record,
}

impl JournalEntry {
    pub fn entry_type(&self) -> EntryType {
        self.record.entry_type()
    }
}

/// Appends one framed entry to `out`.
pub fn encode_frame(entry: &JournalEntry, out: &mut Vec<u8>) {
    let body = serde_json::to_vec(entry).expect("journal entries always serialize");
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&crc32fast::hash(&body).to_be_bytes());
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameFault {
    /// Fewer bytes remain than the header or declared length requires.
    Truncated,
    TooLarge(u32),
    BadChecksum,
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameError {
    /// Byte offset of the frame header.
    pub offset: usize,
    /// Zero-based index of the frame.
    pub index: usize,
    pub fault: FrameFault,
}

impl std::fmt::Display for FrameError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "frame {} at byte {}: {:?}", self.index, self.offset, self.fault)
    }
}

/// Result of scanning a journal: the longest valid prefix, and the fault
/// that stopped the scan if it did not reach end of input.
#[derive(Debug, Clone, Default)]
pub struct FrameScan {
    pub entries: Vec<JournalEntry>,
    pub valid_len: usize,
    pub error: Option<FrameError>,
}

/// Decodes frames until the input ends or a frame fails. Never panics.
pub fn scan_frames(bytes: &[u8]) -> FrameScan {
    let mut scan = FrameScan::default();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let fail = |fault| FrameError {
            offset: pos,
            index: scan.entries.len(),
            fault,
        };
        let Some(header) = bytes.get(pos..pos + 4) else {
            scan.error = Some(fail(FrameFault::Truncated));
            break;
        };
        let len = u32::from_be_bytes(header.try_into().expect("4 bytes"));
        if len as usize > MAX_ENTRY_BYTES {
            scan.error = Some(fail(FrameFault::TooLarge(len)));
            break;
        }
        let body_start = pos + 4;
        let body_end = body_start + len as usize;
        let (Some(body), Some(crc)) = (bytes.get(body_start..body_end), bytes.get(body_end..body_end + 4)) else {
            scan.error = Some(fail(FrameFault::Truncated));
            break;
        };
        if crc32fast::hash(body).to_be_bytes() != crc {
            scan.error = Some(fail(FrameFault::BadChecksum));
            break;
        }
        match serde_json::from_slice::<JournalEntry>(body) {
            Ok(entry) => scan.entries.push(entry),
            Err(e) => {
                scan.error = Some(fail(FrameFault::Malformed(e.to_string())));
                break;
            }
        }
        pos = body_end + 4;
        scan.valid_len = pos;
    }
    scan
}

/// Strict decode: every byte must belong to a valid frame.
pub fn decode_frames(bytes: &[u8]) -> Result<Vec<JournalEntry>, FrameError> {
    let scan = scan_frames(bytes);
    match scan.error {
        Some(e) => Err(e),
        None => Ok(scan.entries),
    }
}

/// Durable storage for journal frames.
pub trait JournalSink: Send {
    /// Current contents, read once at startup for replay.
    fn load(&mut self) -> io::Result<Vec<u8>>;
    /// Appends already-framed bytes. All or nothing from the caller's view:
    /// on error the service discards the batch.
    fn append(&mut self, frames: &[u8]) -> io::Result<()>;
}

/// In-memory journal whose bytes can be inspected or copied.
#[derive(Debug, Default, Clone)]
pub struct MemoryJournal {
    bytes: Arc<Mutex<Vec<u8>>>,
}

impl MemoryJournal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self {
            bytes: Arc::new(Mutex::new(bytes)),
        }
    }

    pub fn bytes(&self) -> Vec<u8> {
        self.bytes.lock().clone()
    }

    /// Direct access for corruption tests.
    pub fn with_bytes_mut<R>(&self, f: impl FnOnce(&mut Vec<u8>) -> R) -> R {
        f(&mut self.bytes.lock())
    }
}

impl JournalSink for MemoryJournal {
    fn load(&mut self) -> io::Result<Vec<u8>> {
        Ok(self.bytes())
    }

    fn append(&mut self, frames: &[u8]) -> io::Result<()> {
        self.bytes.lock().extend_from_slice(frames);
        Ok(())
    }
}

/// Journal file, synced after every append.
#[derive(Debug)]
pub struct FileJournal {
    path: PathBuf,
    file: File,
}

impl FileJournal {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl JournalSink for FileJournal {
    fn load(&mut self) -> io::Result<Vec<u8>> {
        let mut buf = Vec::new();
        File::open(&self.path)?.read_to_end(&mut buf)?;
        Ok(buf)
    }

    fn append(&mut self, frames: &[u8]) -> io::Result<()> {
        self.file.write_all(frames)?;
        self.file.sync_data()
    }
}

/// Wraps a sink and fails appends while armed.
#[derive(Debug)]
pub struct FaultyJournal<S> {
    inner: S,
    armed: Arc<AtomicBool>,
}

impl<S: JournalSink> FaultyJournal<S> {
    pub fn new(inner: S) -> (Self, FaultSwitch) {
        let armed = Arc::new(AtomicBool::new(false));
        (
            Self {
                inner,
                armed: armed.clone(),
            },
            FaultSwitch(armed),
        )
    }
}

#[derive(Debug, Clone)]
pub struct FaultSwitch(Arc<AtomicBool>);

impl FaultSwitch {
    pub fn arm(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn disarm(&self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

impl<S: JournalSink> JournalSink for FaultyJournal<S> {
    fn load(&mut self) -> io::Result<Vec<u8>> {
        self.inner.load()
    }

    fn append(&mut self, frames: &[u8]) -> io::Result<()> {
        if self.armed.load(Ordering::SeqCst) {
            return Err(io::Error::other("injected journal fault"));
        }
        self.inner.append(frames)
    }
}
