//! Materialized module state, built exclusively by applying journal records.
//!
//! Live operations and startup replay both go through [`State::apply`], so
//! the state after an operation sequence and the state after replaying that
//! sequence's journal are the same by construction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::audit::{AuditAction, AuditEntry, Outcome};
use crate::auth::{AuthSession, FailureTracker, LockoutPolicy, OneTimeToken, SessionId, TokenId};
use crate::identity::{StaffIdentity, StaffNumber};
use crate::journal::{Record, Tombstone};
use crate::mail::Mailbox;
use crate::vault::{RecordId, SealedRecord, VaultStatus};

/// Audit details that mark a failure counted toward lockout.
pub(crate) const DETAIL_BAD_CREDENTIALS: &str = "credential check failed";
pub(crate) const DETAIL_CODE_MISMATCH: &str = "code mismatch";
pub(crate) const DETAIL_CODE_EXPIRED: &str = "code expired";

#[derive(Debug, Default, Clone)]
pub(crate) struct State {
    pub identities: BTreeMap<StaffNumber, StaffIdentity>,
    pub email_index: HashMap<String, StaffNumber>,
    pub mailboxes: BTreeMap<String, Mailbox>,
    pub tokens: BTreeMap<TokenId, OneTimeToken>,
    /// Most recent unconsumed, unvoided token per session.
    pub live_token: HashMap<SessionId, TokenId>,
    pub sessions: BTreeMap<SessionId, AuthSession>,
    pub records: BTreeMap<RecordId, SealedRecord>,
    pub audit: Vec<AuditEntry>,
    pub tombstone: Option<Tombstone>,
    pub failures: FailureTracker,
    pub next_wrap_counter: u64,
}

impl State {
    pub fn apply(&mut self, record: Record, lockout: &LockoutPolicy) {
        match record {
            Record::Identity(id) => {
                self.email_index.insert(id.email.clone(), id.staff_number.clone());
                self.identities.insert(id.staff_number.clone(), id);
            }
            Record::Mailbox(mb) => {
                let entry = self.mailboxes.entry(mb.email.clone()).or_insert_with(|| Mailbox {
                    email: mb.email.clone(),
                    credential: mb.credential.clone(),
                    messages: Vec::new(),
                });
                entry.credential = mb.credential;
            }
            Record::MailMessage(m) => {
                if let Some(mb) = self.mailboxes.get_mut(&m.email) {
                    match mb.messages.iter_mut().find(|x| x.message_id == m.message.message_id) {
                        Some(existing) => *existing = m.message,
                        None => mb.messages.push(m.message),
                    }
                }
            }
            Record::Token(t) => {
                if t.consumed || t.voided {
                    if self.live_token.get(&t.bound_session) == Some(&t.token_id) {
                        self.live_token.remove(&t.bound_session);
                    }
                } else {
                    self.live_token.insert(t.bound_session.clone(), t.token_id.clone());
                }
                self.tokens.insert(t.token_id.clone(), t);
            }
            Record::Session(s) => {
                self.sessions.insert(s.session_id.clone(), s);
            }
            Record::SealedRecord(r) => {
                let counter = wrap_counter_of(&r);
                self.next_wrap_counter = self.next_wrap_counter.max(counter + 1);
                self.records.insert(r.record_id.clone(), r);
            }
            Record::Audit(e) => {
                self.track_failures(&e, lockout);
                self.audit.push(e);
            }
            Record::Tombstone(t) => {
                self.tombstone.get_or_insert(t);
            }
        }
    }

    fn track_failures(&mut self, e: &AuditEntry, lockout: &LockoutPolicy) {
        let Some(staff) = &e.staff_number else { return };
        match (e.action, e.outcome) {
            (AuditAction::LoginStep1 | AuditAction::AccessGranted, Outcome::Failure)
                if matches!(
                    e.detail.as_str(),
                    DETAIL_BAD_CREDENTIALS | DETAIL_CODE_MISMATCH | DETAIL_CODE_EXPIRED
                ) =>
            {
                self.failures.record(staff, e.timestamp, lockout);
            }
            (AuditAction::LoginStep1, Outcome::Success) | (AuditAction::Suspend, _) => {
                self.failures.clear(staff);
            }
            _ => {}
        }
    }

    pub fn last_audit(&self) -> Option<&AuditEntry> {
        self.audit.last()
    }

    pub fn snapshot(&self, vault: VaultStatus) -> StateSnapshot {
        StateSnapshot {
            identities: self.identities.values().cloned().collect(),
            mailboxes: self.mailboxes.values().cloned().collect(),
            tokens: self.tokens.values().cloned().collect(),
            sessions: self.sessions.values().cloned().collect(),
            records: self.records.values().cloned().collect(),
            audit: self.audit.clone(),
            tombstone: self.tombstone.clone(),
            vault,
        }
    }
}

fn wrap_counter_of(r: &SealedRecord) -> u64 {
    r.wrapped_data_key
        .get(4..12)
        .map_or(0, |b| u64::from_be_bytes(b.try_into().expect("8 bytes")))
}

/// Complete persisted state in a canonical order, for equality checks
/// between a live service and one rebuilt from its journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub identities: Vec<StaffIdentity>,
    pub mailboxes: Vec<Mailbox>,
    pub tokens: Vec<OneTimeToken>,
    pub sessions: Vec<AuthSession>,
    pub records: Vec<SealedRecord>,
    pub audit: Vec<AuditEntry>,
    pub tombstone: Option<Tombstone>,
    pub vault: VaultStatus,
}
