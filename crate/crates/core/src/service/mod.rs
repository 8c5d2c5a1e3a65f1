//! The service: every operation of the registry, the staged login, the
//! mailboxes, the record vault and the audit log, over one journal.
//!
//! All mutations go through a transaction: records (including the audit
//! entry) are framed, appended to the journal in one write, and only then
//! applied to memory. A failed journal write therefore leaves no trace, which
//! is what makes auditing fail-closed. Slow work (password hashing, record
//! encryption) runs outside the state lock; the lock is re-taken and the
//! relevant state re-checked before committing.

mod mailbox;
mod records;
mod registry;
mod session;

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use tracing::{info, warn};

use crate::audit::{self, AuditAction, AuditEntry, ChainReport, Outcome};
use crate::auth::{
    AuthSession, LockoutPolicy, MailHandle, SessionId, SessionState, DEFAULT_IDLE_TIMEOUT_SECS, DEFAULT_TOKEN_TTL_SECS,
};
use crate::clock::{Clock, SystemClock};
use crate::entropy::{EntropySource, OsEntropy};
use crate::error::{Error, Result};
use crate::identity::{KdfParams, Role, StaffIdentity, StaffNumber, Status};
use crate::journal::{encode_frame, scan_frames, JournalEntry, JournalSink, Record};
use crate::mail::MailRelay;
use crate::policy::{permits, Action};
use crate::state::{State, StateSnapshot};
use crate::vault::{self, MasterKey, MasterKeyState, VaultStatus};

pub use mailbox::InboxMessage;
pub use registry::Registration;
pub use session::TokenReceipt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub token_ttl_secs: u32,
    pub idle_timeout_secs: u32,
    pub lockout: LockoutPolicy,
    pub kdf: KdfParams,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            token_ttl_secs: DEFAULT_TOKEN_TTL_SECS,
            idle_timeout_secs: DEFAULT_IDLE_TIMEOUT_SECS,
            lockout: LockoutPolicy::default(),
            kdf: KdfParams::default(),
        }
    }
}

pub struct ServiceBuilder {
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    entropy: Arc<dyn EntropySource>,
    master_key: Option<MasterKey>,
    relay: Option<Arc<dyn MailRelay>>,
}

impl ServiceBuilder {
    pub fn config(mut self, config: ServiceConfig) -> Self {
        self.config = config;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn entropy(mut self, entropy: Arc<dyn EntropySource>) -> Self {
        self.entropy = entropy;
        self
    }

    pub fn master_key(mut self, key: Option<MasterKey>) -> Self {
        self.master_key = key;
        self
    }

    pub fn relay(mut self, relay: Arc<dyn MailRelay>) -> Self {
        self.relay = Some(relay);
        self
    }

    /// Replays `journal` and returns a ready service.
    ///
    /// Fails with `JournalCorrupt` if any frame is damaged or the audit chain
    /// does not verify, and with `MasterKeyMismatch` if the supplied key
    /// unwraps none of the stored records.
    pub fn open(self, mut journal: Box<dyn JournalSink>) -> Result<Service> {
        let bytes = journal.load()?;
        let state = replay(&bytes, &self.config.lockout)?;
        let vault = match (&state.tombstone, self.master_key) {
            (Some(t), _) => MasterKeyState::Revoked {
                revoked_at: t.revoked_at,
                revoked_by: t.revoked_by.clone(),
            },
            (None, Some(key)) => {
                // One tampered record must not read as a wrong key.
                if !state.records.is_empty() && !state.records.values().any(|r| vault::key_matches(&key, r)) {
                    return Err(Error::MasterKeyMismatch);
                }
                MasterKeyState::Active(key)
            }
            (None, None) => MasterKeyState::Absent,
        };
        info!(
            identities = state.identities.len(),
            audit_entries = state.audit.len(),
            records = state.records.len(),
            "journal replayed"
        );
        Ok(Service {
            config: self.config,
            clock: self.clock,
            entropy: self.entropy,
            relay: self.relay,
            inner: Mutex::new(Inner {
                state,
                journal,
                vault,
                handles: HashMap::new(),
            }),
        })
    }
}

/// Rebuilds state from journal bytes, verifying frames and the audit chain.
fn replay(bytes: &[u8], lockout: &LockoutPolicy) -> Result<State> {
    let scan = scan_frames(bytes);
    let audits: Vec<AuditEntry> = scan
        .entries
        .iter()
        .filter_map(|e| match &e.record {
            Record::Audit(a) => Some(a.clone()),
            _ => None,
        })
        .collect();
    let report = audit::verify_chain(&audits);
    if let Some(bad) = report.first_bad_seq {
        return Err(Error::JournalCorrupt {
            first_bad_seq: bad,
            reason: "audit chain broken".into(),
        });
    }
    if let Some(err) = scan.error {
        return Err(Error::JournalCorrupt {
            first_bad_seq: audits.len() as u64 + 1,
            reason: err.to_string(),
        });
    }
    let mut state = State::default();
    for entry in scan.entries {
        state.apply(entry.record, lockout);
    }
    Ok(state)
}

/// Offline integrity check of journal bytes: frame checksums plus the audit
/// hash chain. A damaged frame stops the scan and is reported at the audit
/// seq that would have come next, which is never later than the damage.
pub fn verify_journal(bytes: &[u8]) -> ChainReport {
    let scan = scan_frames(bytes);
    let audits: Vec<AuditEntry> = scan
        .entries
        .into_iter()
        .filter_map(|e| match e.record {
            Record::Audit(a) => Some(a),
            _ => None,
        })
        .collect();
    let mut report = audit::verify_chain(&audits);
    if report.valid && scan.error.is_some() {
        report.valid = false;
        report.first_bad_seq = Some(audits.len() as u64 + 1);
    }
    report
}

/// Audit entries in a journal, up to the first damaged frame.
pub fn journal_audit_entries(bytes: &[u8]) -> Vec<AuditEntry> {
    scan_frames(bytes)
        .entries
        .into_iter()
        .filter_map(|e| match e.record {
            Record::Audit(a) => Some(a),
            _ => None,
        })
        .collect()
}

pub struct Service {
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    entropy: Arc<dyn EntropySource>,
    relay: Option<Arc<dyn MailRelay>>,
    inner: Mutex<Inner>,
}

struct MailSession {
    email: String,
    last_used: DateTime<Utc>,
}

struct Inner {
    state: State,
    journal: Box<dyn JournalSink>,
    vault: MasterKeyState,
    handles: HashMap<MailHandle, MailSession>,
}

/// Records staged for one atomic commit.
struct Txn {
    now: DateTime<Utc>,
    records: Vec<Record>,
}

impl Txn {
    fn new(now: DateTime<Utc>) -> Self {
        Self {
            now: crate::clock::to_millis(now),
            records: Vec::new(),
        }
    }

    fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    fn audit(
        &mut self,
        state: &State,
        staff: Option<&StaffNumber>,
        action: AuditAction,
        outcome: Outcome,
        detail: impl Into<String>,
    ) -> Result<()> {
        self.audit_guarded(state, staff, action, outcome, detail, &[])
    }

    /// Like [`Txn::audit`], additionally rejecting details containing any of
    /// `secrets`.
    fn audit_guarded(
        &mut self,
        state: &State,
        staff: Option<&StaffNumber>,
        action: AuditAction,
        outcome: Outcome,
        detail: impl Into<String>,
        secrets: &[&str],
    ) -> Result<()> {
        let detail = detail.into();
        audit::check_detail(&detail, secrets)?;
        let prev = self
            .records
            .iter()
            .rev()
            .find_map(|r| match r {
                Record::Audit(a) => Some(a),
                _ => None,
            })
            .or_else(|| state.last_audit());
        let entry = AuditEntry::chained(prev, self.now, staff.cloned(), action, outcome, detail)?;
        self.records.push(Record::Audit(entry));
        Ok(())
    }
}

impl Inner {
    fn commit(&mut self, txn: Txn, lockout: &LockoutPolicy) -> Result<()> {
        if txn.records.is_empty() {
            return Ok(());
        }
        let mut frames = Vec::new();
        let entries: Vec<JournalEntry> = txn
            .records
            .into_iter()
            .map(|record| JournalEntry {
                written_at: txn.now,
                record,
            })
            .collect();
        for e in &entries {
            encode_frame(e, &mut frames);
        }
        if let Err(e) = self.journal.append(&frames) {
            warn!(error = %e, "journal append failed; operation rejected");
            return Err(Error::Storage(e.to_string()));
        }
        for e in entries {
            self.state.apply(e.record, lockout);
        }
        Ok(())
    }
}

/// A session that passed all three stages, with its identity.
struct Actor {
    session: AuthSession,
    identity: StaffIdentity,
}

impl Service {
    pub fn builder() -> ServiceBuilder {
        ServiceBuilder {
            config: ServiceConfig::default(),
            clock: Arc::new(SystemClock),
            entropy: Arc::new(OsEntropy),
            master_key: None,
            relay: None,
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn now(&self) -> DateTime<Utc> {
        crate::clock::to_millis(self.clock.now())
    }

    fn commit(&self, inner: &mut Inner, txn: Txn) -> Result<()> {
        inner.commit(txn, &self.config.lockout)
    }

    /// Resolves a bearer session to an authenticated, active identity.
    fn actor(&self, state: &State, session_id: &SessionId, now: DateTime<Utc>) -> Result<Actor> {
        let session = state.sessions.get(session_id).ok_or(Error::NotAuthenticated)?;
        if session.effective_state(now, self.config.idle_timeout_secs) != SessionState::Authenticated {
            return Err(Error::NotAuthenticated);
        }
        let staff = session.staff_number.as_ref().ok_or(Error::NotAuthenticated)?;
        let identity = state.identities.get(staff).ok_or(Error::NotAuthenticated)?;
        if identity.status != Status::Active {
            return Err(Error::NotAuthenticated);
        }
        Ok(Actor {
            session: session.clone(),
            identity: identity.clone(),
        })
    }

    /// Checks `action` against the actor's role. On refusal a `Denied` entry
    /// is committed and the matching error returned.
    fn authorize(&self, inner: &mut Inner, actor: &Actor, action: Action, now: DateTime<Utc>) -> Result<()> {
        if permits(actor.identity.role, action) {
            return Ok(());
        }
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.audit(
            &inner.state,
            Some(&actor.identity.staff_number),
            AuditAction::Denied,
            Outcome::Failure,
            format!("{} refused for role {}", action.name(), actor.identity.role),
        )?;
        self.commit(inner, txn)?;
        Err(if action_requires_admin(action) {
            Error::NotAdmin
        } else {
            Error::Forbidden(actor.identity.role)
        })
    }

    pub fn vault_status(&self) -> VaultStatus {
        self.inner.lock().vault.status()
    }

    /// Full persisted state, for replay comparisons.
    pub fn snapshot(&self) -> StateSnapshot {
        let inner = self.inner.lock();
        inner.state.snapshot(inner.vault.status())
    }

    pub fn identity_count(&self) -> usize {
        self.inner.lock().state.identities.len()
    }

    pub fn audit_len(&self) -> usize {
        self.inner.lock().state.audit.len()
    }

    /// Every audit entry, unfiltered. Operator tooling only; the HTTP
    /// surface goes through [`Service::query_audit`].
    pub fn audit_entries(&self) -> Vec<AuditEntry> {
        self.inner.lock().state.audit.clone()
    }

    pub fn verify_chain(&self) -> ChainReport {
        audit::verify_chain(&self.inner.lock().state.audit)
    }

    /// Appends an audit entry directly. Fails (and changes nothing) if the
    /// detail is rejected or the journal write fails.
    pub fn append_audit(
        &self,
        staff: Option<&StaffNumber>,
        action: AuditAction,
        outcome: Outcome,
        detail: &str,
    ) -> Result<AuditEntry> {
        let mut inner = self.inner.lock();
        let mut txn = Txn::new(self.now());
        txn.audit(&inner.state, staff, action, outcome, detail)?;
        self.commit(&mut inner, txn)?;
        Ok(inner.state.audit.last().cloned().expect("just appended"))
    }

    /// Admin-only audit query.
    pub fn query_audit(&self, session_id: &SessionId, filter: &audit::AuditFilter) -> Result<Vec<AuditEntry>> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.actor(&inner.state, session_id, now)?;
        self.authorize(&mut inner, &actor, Action::QueryAudit, now)?;
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        self.commit(&mut inner, txn)?;
        Ok(audit::query(&inner.state.audit, filter).into_iter().cloned().collect())
    }
}

fn action_requires_admin(action: Action) -> bool {
    Role::ALL
        .iter()
        .filter(|r| permits(**r, action))
        .all(|r| *r == Role::Admin)
}

fn touched(session: &AuthSession, now: DateTime<Utc>) -> AuthSession {
    let mut s = session.clone();
    s.last_activity = now;
    s
}
