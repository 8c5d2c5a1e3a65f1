//! Envelope encryption for examination records.
//!
//! Each document is encrypted with AES-256-GCM under its own random data key;
//! the data key is wrapped (also AES-256-GCM) under the master key. Persisted
//! state therefore holds only ciphertext and wrapped keys, and destroying the
//! master key leaves every record undecryptable.
//!
//! Nonces are a 32-bit random prefix followed by a 64-bit big-endian counter.
//! A data key encrypts exactly one document (counter 0); the master key's
//! wrap counter is the number of records sealed before this one.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use zeroize::{Zeroize, Zeroizing};

use crate::codec::b64;
use crate::entropy::{random_array, EntropySource};
use crate::error::{Error, Result};
use crate::identity::StaffNumber;
pub use crate::ids::RecordId;

pub const MAX_DOCUMENT_BYTES: usize = 16 * 1024 * 1024;
pub const MAX_STUDENT_ID_LEN: usize = 64;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;
pub const WRAPPED_KEY_LEN: usize = NONCE_LEN + 32 + TAG_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordKind {
    LevelResult,
    CumulativeResult,
    TranscriptIncoming,
    TranscriptOutgoing,
    EntryVerification,
}

impl RecordKind {
    pub const ALL: [RecordKind; 5] = [
        RecordKind::LevelResult,
        RecordKind::CumulativeResult,
        RecordKind::TranscriptIncoming,
        RecordKind::TranscriptOutgoing,
        RecordKind::EntryVerification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecordKind::LevelResult => "LevelResult",
            RecordKind::CumulativeResult => "CumulativeResult",
            RecordKind::TranscriptIncoming => "TranscriptIncoming",
            RecordKind::TranscriptOutgoing => "TranscriptOutgoing",
            RecordKind::EntryVerification => "EntryVerification",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RecordKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::InvalidInput("unknown record kind"))
    }
}

pub fn validate_student_id(s: &str) -> Result<()> {
    if s.is_empty() || s.len() > MAX_STUDENT_ID_LEN || s.chars().any(|c| c.is_control()) {
        return Err(Error::InvalidInput("student_id must be 1-64 printable characters"));
    }
    Ok(())
}

/// Canonical binding of a record's identity into both AEAD operations:
/// a domain tag, then each field as u32 big-endian length plus bytes.
pub fn associated_data(record_id: &RecordId, student_id: &str, kind: RecordKind) -> Vec<u8> {
    let mut out = b"drlia-record-v1\0".to_vec();
    for field in [record_id.as_str(), student_id, kind.name()] {
        out.extend_from_slice(&(field.len() as u32).to_be_bytes());
        out.extend_from_slice(field.as_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedRecord {
    pub record_id: RecordId,
    pub student_id: String,
    pub kind: RecordKind,
    #[serde(with = "b64")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "b64")]
    pub nonce: Vec<u8>,
    #[serde(with = "b64")]
    pub wrapped_data_key: Vec<u8>,
    #[serde(with = "b64")]
    pub associated_data: Vec<u8>,
    pub created_by: StaffNumber,
    pub created_at: DateTime<Utc>,
}

/// Everything about a record except its contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub record_id: RecordId,
    pub student_id: String,
    pub kind: RecordKind,
    pub created_by: StaffNumber,
    pub created_at: DateTime<Utc>,
}

impl From<&SealedRecord> for RecordMetadata {
    fn from(r: &SealedRecord) -> Self {
        Self {
            record_id: r.record_id.clone(),
            student_id: r.student_id.clone(),
            kind: r.kind,
            created_by: r.created_by.clone(),
            created_at: r.created_at,
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct RecordFilter {
    pub student_id: Option<String>,
    pub kind: Option<RecordKind>,
}

impl RecordFilter {
    pub fn matches(&self, r: &SealedRecord) -> bool {
        self.student_id.as_deref().is_none_or(|s| s == r.student_id) && self.kind.is_none_or(|k| k == r.kind)
    }
}

/// 256-bit master key. Zeroized on drop.
#[derive(Clone)]
pub struct MasterKey(Zeroizing<[u8; 32]>);

impl MasterKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(Zeroizing::new(bytes))
    }

    pub fn generate(entropy: &dyn EntropySource) -> Result<Self> {
        Ok(Self::from_bytes(random_array(entropy)?))
    }

    /// Parses 32 raw bytes or 64 hex digits (surrounding whitespace ignored).
    pub fn from_key_material(raw: &[u8]) -> Result<Self> {
        if raw.len() == 32 {
            let mut k = [0u8; 32];
            k.copy_from_slice(raw);
            return Ok(Self::from_bytes(k));
        }
        let text = std::str::from_utf8(raw)
            .map_err(|_| Error::InvalidInput("master key must be 32 bytes or 64 hex digits"))?
            .trim();
        let mut k = Zeroizing::new([0u8; 32]);
        hex::decode_to_slice(text, k.as_mut())
            .map_err(|_| Error::InvalidInput("master key must be 32 bytes or 64 hex digits"))?;
        Ok(Self(k))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = Zeroizing::new(std::fs::read(path)?);
        Self::from_key_material(&raw)
    }

    pub fn to_hex(&self) -> Zeroizing<String> {
        Zeroizing::new(hex::encode(self.0.as_ref()))
    }

    fn cipher(&self) -> Aes256Gcm {
        Aes256Gcm::new_from_slice(self.0.as_ref()).expect("32-byte key")
    }
}

impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(..)")
    }
}

/// Master-key lifecycle. `Active -> Revoked` is one-way.
#[derive(Debug)]
pub enum MasterKeyState {
    Active(MasterKey),
    /// No key was supplied to this process; behaves as locked.
    Absent,
    Revoked {
        revoked_at: DateTime<Utc>,
        revoked_by: StaffNumber,
    },
}

impl MasterKeyState {
    /// Moves to `Revoked`, wiping the key material in place.
    pub fn revoke(&mut self, revoked_at: DateTime<Utc>, revoked_by: StaffNumber) {
        if let MasterKeyState::Active(key) = self {
            key.0.zeroize();
        }
        *self = MasterKeyState::Revoked { revoked_at, revoked_by };
    }

    pub fn status(&self) -> VaultStatus {
        match self {
            MasterKeyState::Active(_) => VaultStatus::Active,
            MasterKeyState::Absent => VaultStatus::KeyAbsent,
            MasterKeyState::Revoked { revoked_at, revoked_by } => VaultStatus::Revoked {
                revoked_at: *revoked_at,
                revoked_by: revoked_by.clone(),
            },
        }
    }

    pub fn active_key(&self) -> Option<&MasterKey> {
        match self {
            MasterKeyState::Active(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum VaultStatus {
    Active,
    KeyAbsent,
    Revoked {
        revoked_at: DateTime<Utc>,
        revoked_by: StaffNumber,
    },
}

/// Output of [`seal`], ready to be placed in a [`SealedRecord`].
pub struct SealedParts {
    pub ciphertext: Vec<u8>,
    pub nonce: Vec<u8>,
    pub wrapped_data_key: Vec<u8>,
    pub associated_data: Vec<u8>,
}

fn nonce_bytes(prefix: [u8; 4], counter: u64) -> [u8; NONCE_LEN] {
    let mut n = [0u8; NONCE_LEN];
    n[..4].copy_from_slice(&prefix);
    n[4..].copy_from_slice(&counter.to_be_bytes());
    n
}

pub fn seal(
    master: &MasterKey,
    wrap_counter: u64,
    record_id: &RecordId,
    student_id: &str,
    kind: RecordKind,
    document: &[u8],
    entropy: &dyn EntropySource,
) -> Result<SealedParts> {
    let aad = associated_data(record_id, student_id, kind);
    let data_key: Zeroizing<[u8; 32]> = Zeroizing::new(random_array(entropy)?);
    let doc_nonce = nonce_bytes(random_array(entropy)?, 0);
    let wrap_nonce = nonce_bytes(random_array(entropy)?, wrap_counter);

    let cipher = Aes256Gcm::new_from_slice(data_key.as_ref()).expect("32-byte key");
    let ciphertext = cipher
        .encrypt(
            Nonce::from_slice(&doc_nonce),
            Payload {
                msg: document,
                aad: &aad,
            },
        )
        .map_err(|_| Error::Storage("document encryption failed".into()))?;

    let wrapped = master
        .cipher()
        .encrypt(
            Nonce::from_slice(&wrap_nonce),
            Payload {
                msg: data_key.as_ref(),
                aad: &aad,
            },
        )
        .map_err(|_| Error::Storage("key wrap failed".into()))?;
    let mut wrapped_data_key = wrap_nonce.to_vec();
    wrapped_data_key.extend_from_slice(&wrapped);

    Ok(SealedParts {
        ciphertext,
        nonce: doc_nonce.to_vec(),
        wrapped_data_key,
        associated_data: aad,
    })
}

fn unwrap_data_key(master: &MasterKey, record: &SealedRecord) -> Result<Zeroizing<Vec<u8>>> {
    if record.wrapped_data_key.len() != WRAPPED_KEY_LEN {
        return Err(Error::IntegrityFailure);
    }
    let (wrap_nonce, wrapped) = record.wrapped_data_key.split_at(NONCE_LEN);
    master
        .cipher()
        .decrypt(
            Nonce::from_slice(wrap_nonce),
            Payload {
                msg: wrapped,
                aad: &record.associated_data,
            },
        )
        .map(Zeroizing::new)
        .map_err(|_| Error::IntegrityFailure)
}

/// Decrypts a record. Any alteration of ciphertext, nonce, wrapped key,
/// associated data or the metadata it binds yields `IntegrityFailure`.
pub fn open(master: &MasterKey, record: &SealedRecord) -> Result<Zeroizing<Vec<u8>>> {
    let expected_aad = associated_data(&record.record_id, &record.student_id, record.kind);
    if record.associated_data != expected_aad || record.nonce.len() != NONCE_LEN {
        return Err(Error::IntegrityFailure);
    }
    let data_key = unwrap_data_key(master, record)?;
    let cipher = Aes256Gcm::new_from_slice(&data_key).map_err(|_| Error::IntegrityFailure)?;
    cipher
        .decrypt(
            Nonce::from_slice(&record.nonce),
            Payload {
                msg: &record.ciphertext,
                aad: &record.associated_data,
            },
        )
        .map(Zeroizing::new)
        .map_err(|_| Error::IntegrityFailure)
}

/// Whether `master` is the key the record was sealed under.
pub fn key_matches(master: &MasterKey, record: &SealedRecord) -> bool {
    unwrap_data_key(master, record).is_ok()
}
