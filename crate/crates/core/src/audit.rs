//! Hash-chained audit entries.
//!
//! `entry_hash = SHA-256(canonical(seq, timestamp, staff_number, action,
//! outcome, detail, prev_hash))`; entry 1 chains from 32 zero bytes. Any
//! modification of a committed entry breaks the chain at that entry or at the
//! one after it.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auth::is_code_symbol;
use crate::codec::hex32;
use crate::error::{Error, Result};
use crate::identity::StaffNumber;

pub const GENESIS_HASH: [u8; 32] = [0u8; 32];
pub const MAX_DETAIL_CHARS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditAction {
    Register,
    GrantPrivilege,
    LoginStep1,
    TokenIssued,
    AccessGranted,
    Logout,
    RecordSealed,
    RecordOpened,
    Lockdown,
    Denied,
    Suspend,
}

impl AuditAction {
    pub const ALL: [AuditAction; 11] = [
        AuditAction::Register,
        AuditAction::GrantPrivilege,
        AuditAction::LoginStep1,
        AuditAction::TokenIssued,
        AuditAction::AccessGranted,
        AuditAction::Logout,
        AuditAction::RecordSealed,
        AuditAction::RecordOpened,
        AuditAction::Lockdown,
        AuditAction::Denied,
        AuditAction::Suspend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AuditAction::Register => "Register",
            AuditAction::GrantPrivilege => "GrantPrivilege",
            AuditAction::LoginStep1 => "LoginStep1",
            AuditAction::TokenIssued => "TokenIssued",
            AuditAction::AccessGranted => "AccessGranted",
            AuditAction::Logout => "Logout",
            AuditAction::RecordSealed => "RecordSealed",
            AuditAction::RecordOpened => "RecordOpened",
            AuditAction::Lockdown => "Lockdown",
            AuditAction::Denied => "Denied",
            AuditAction::Suspend => "Suspend",
        }
    }
}

impl fmt::Display for AuditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AuditAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AuditAction::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or(Error::InvalidInput("unknown audit action"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failure,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "Success",
            Outcome::Failure => "Failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub staff_number: Option<StaffNumber>,
    pub action: AuditAction,
    pub outcome: Outcome,
    pub detail: String,
    #[serde(with = "hex32")]
    pub prev_hash: [u8; 32],
    #[serde(with = "hex32")]
    pub entry_hash: [u8; 32],
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_be_bytes());
    buf.extend_from_slice(s.as_bytes());
}

impl AuditEntry {
    /// Canonical byte encoding of every field except `entry_hash`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(96 + self.detail.len());
        buf.extend_from_slice(b"drlia-audit-v1\0");
        buf.extend_from_slice(&self.seq.to_be_bytes());
        buf.extend_from_slice(&self.timestamp.timestamp_millis().to_be_bytes());
        match &self.staff_number {
            Some(s) => {
                buf.push(1);
                put_str(&mut buf, s.as_str());
            }
            None => buf.push(0),
        }
        put_str(&mut buf, self.action.name());
        put_str(&mut buf, self.outcome.name());
        put_str(&mut buf, &self.detail);
        buf.extend_from_slice(&self.prev_hash);
        buf
    }

    pub fn compute_hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }

    /// Builds the entry that follows `prev` (or the genesis entry), after
    /// running `detail` through [`check_detail`].
    pub fn chained(
        prev: Option<&AuditEntry>,
        timestamp: DateTime<Utc>,
        staff_number: Option<StaffNumber>,
        action: AuditAction,
        outcome: Outcome,
        detail: impl Into<String>,
    ) -> Result<Self> {
        let detail = detail.into();
        check_detail(&detail, &[])?;
        let mut entry = AuditEntry {
            seq: prev.map_or(1, |p| p.seq + 1),
            timestamp: crate::clock::to_millis(timestamp),
            staff_number,
            action,
            outcome,
            detail,
            prev_hash: prev.map_or(GENESIS_HASH, |p| p.entry_hash),
            entry_hash: [0; 32],
        };
        entry.entry_hash = entry.compute_hash();
        Ok(entry)
    }

    /// One tab-separated export line: seq, timestamp, staff number (`-` if
    /// absent), action, outcome, detail, prev_hash, entry_hash.
    pub fn export_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.seq,
            self.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
            self.staff_number.as_ref().map_or("-", |s| s.as_str()),
            self.action,
            self.outcome.name(),
            self.detail,
            hex::encode(self.prev_hash),
            hex::encode(self.entry_hash),
        )
    }
}

/// Rejects details that are too long, contain control characters, contain
/// any of `forbidden`, or contain a word shaped like a one-time code.
pub fn check_detail(detail: &str, forbidden: &[&str]) -> Result<()> {
    if detail.chars().count() > MAX_DETAIL_CHARS {
        return Err(Error::RejectedDetail("longer than 256 characters"));
    }
    if detail.chars().any(char::is_control) {
        return Err(Error::RejectedDetail("control character"));
    }
    if forbidden.iter().any(|s| !s.is_empty() && detail.contains(s)) {
        return Err(Error::RejectedDetail("contains secret material"));
    }
    let code_like = detail
        .split(|c: char| !c.is_ascii_alphanumeric())
        .any(|w| w.len() == crate::auth::CODE_LEN && w.bytes().all(is_code_symbol));
    if code_like {
        return Err(Error::RejectedDetail("contains a one-time code"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub valid: bool,
    pub entries: u64,
    pub first_bad_seq: Option<u64>,
}

/// Recomputes every link. `first_bad_seq` is the position (1-based) of the
/// first entry whose seq, prev_hash or entry_hash is wrong.
pub fn verify_chain(entries: &[AuditEntry]) -> ChainReport {
    let mut prev_hash = GENESIS_HASH;
    for (i, e) in entries.iter().enumerate() {
        let expected_seq = i as u64 + 1;
        if e.seq != expected_seq || e.prev_hash != prev_hash || e.compute_hash() != e.entry_hash {
            return ChainReport {
                valid: false,
                entries: entries.len() as u64,
                first_bad_seq: Some(expected_seq),
            };
        }
        prev_hash = e.entry_hash;
    }
    ChainReport {
        valid: true,
        entries: entries.len() as u64,
        first_bad_seq: None,
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    pub staff_number: Option<StaffNumber>,
    pub action: Option<AuditAction>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl AuditFilter {
    pub fn matches(&self, e: &AuditEntry) -> bool {
        self.staff_number
            .as_ref()
            .is_none_or(|s| e.staff_number.as_ref() == Some(s))
            && self.action.is_none_or(|a| a == e.action)
            && self.from.is_none_or(|f| e.timestamp >= f)
            && self.to.is_none_or(|t| e.timestamp <= t)
    }
}

pub fn query<'a>(entries: &'a [AuditEntry], filter: &AuditFilter) -> Vec<&'a AuditEntry> {
    if let (Some(from), Some(to)) = (filter.from, filter.to) {
        if from > to {
            return Vec::new();
        }
    }
    entries.iter().filter(|e| filter.matches(e)).collect()
}
