use zeroize::Zeroizing;

use super::session::live_token_of;
use super::{touched, Actor, Inner, Service, Txn};
use crate::audit::{AuditAction, Outcome};
use crate::auth::{SessionId, TokenPurpose};
use crate::error::{Error, Result};
use crate::journal::{Record, Tombstone};
use crate::policy::Action;
use crate::vault::{
    self, RecordFilter, RecordId, RecordKind, RecordMetadata, SealedRecord, VaultStatus, MAX_DOCUMENT_BYTES,
};

impl Service {
    /// Commits a failed attempt under `action` and returns `err`.
    fn record_refusal<T>(
        &self,
        inner: &mut Inner,
        actor: &Actor,
        action: AuditAction,
        detail: &str,
        err: Error,
        now: chrono::DateTime<chrono::Utc>,
    ) -> Result<T> {
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.audit(
            &inner.state,
            Some(&actor.identity.staff_number),
            action,
            Outcome::Failure,
            detail,
        )?;
        self.commit(inner, txn)?;
        Err(err)
    }

    /// Resolves the caller for a vault access, auditing an unauthenticated
    /// attempt under `action` before refusing it.
    fn vault_actor(
        &self,
        inner: &mut Inner,
        session_id: &SessionId,
        action: AuditAction,
        now: chrono::DateTime<chrono::Utc>,
    ) -> Result<Actor> {
        match self.actor(&inner.state, session_id, now) {
            Ok(actor) => Ok(actor),
            Err(err) => {
                let staff = inner
                    .state
                    .sessions
                    .get(session_id)
                    .and_then(|s| s.staff_number.clone());
                let mut txn = Txn::new(now);
                txn.audit(
                    &inner.state,
                    staff.as_ref(),
                    action,
                    Outcome::Failure,
                    "not authenticated",
                )?;
                self.commit(inner, txn)?;
                Err(err)
            }
        }
    }

    /// Encrypts and stores a document for a student.
    pub fn seal_record(
        &self,
        session_id: &SessionId,
        student_id: &str,
        kind: RecordKind,
        document: &[u8],
    ) -> Result<RecordMetadata> {
        if document.is_empty() {
            return Err(Error::EmptyDocument);
        }
        if document.len() > MAX_DOCUMENT_BYTES {
            return Err(Error::OversizeDocument {
                max: MAX_DOCUMENT_BYTES,
            });
        }
        vault::validate_student_id(student_id)?;

        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.vault_actor(&mut inner, session_id, AuditAction::RecordSealed, now)?;
        self.authorize(&mut inner, &actor, Action::SealRecord, now)?;
        let Some(master) = inner.vault.active_key() else {
            return self.record_refusal(
                &mut inner,
                &actor,
                AuditAction::RecordSealed,
                "vault locked",
                Error::VaultLocked,
                now,
            );
        };

        // Sealed under the lock so each wrap nonce counter is used once.
        let record_id = RecordId::generate(self.entropy.as_ref())?;
        let parts = vault::seal(
            master,
            inner.state.next_wrap_counter,
            &record_id,
            student_id,
            kind,
            document,
            self.entropy.as_ref(),
        )?;
        let record = SealedRecord {
            record_id: record_id.clone(),
            student_id: student_id.to_owned(),
            kind,
            ciphertext: parts.ciphertext,
            nonce: parts.nonce,
            wrapped_data_key: parts.wrapped_data_key,
            associated_data: parts.associated_data,
            created_by: actor.identity.staff_number.clone(),
            created_at: Txn::new(now).now,
        };
        let meta = RecordMetadata::from(&record);
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.push(Record::SealedRecord(record));
        txn.audit(
            &inner.state,
            Some(&actor.identity.staff_number),
            AuditAction::RecordSealed,
            Outcome::Success,
            format!("sealed {record_id} ({})", kind.name()),
        )?;
        self.commit(&mut inner, txn)?;
        Ok(meta)
    }

    /// Decrypts a record. Every attempt is audited.
    pub fn open_record(
        &self,
        session_id: &SessionId,
        record_id: &RecordId,
    ) -> Result<(RecordMetadata, Zeroizing<Vec<u8>>)> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.vault_actor(&mut inner, session_id, AuditAction::RecordOpened, now)?;
        self.authorize(&mut inner, &actor, Action::OpenRecord, now)?;
        let Some(record) = inner.state.records.get(record_id).cloned() else {
            return self.record_refusal(
                &mut inner,
                &actor,
                AuditAction::RecordOpened,
                "unknown record",
                Error::UnknownRecord,
                now,
            );
        };
        let Some(master) = inner.vault.active_key() else {
            return self.record_refusal(
                &mut inner,
                &actor,
                AuditAction::RecordOpened,
                "vault locked",
                Error::VaultLocked,
                now,
            );
        };
        let plaintext = match vault::open(master, &record) {
            Ok(p) => p,
            Err(e) => {
                let detail = format!("integrity failure on {record_id}");
                return self.record_refusal(&mut inner, &actor, AuditAction::RecordOpened, &detail, e, now);
            }
        };
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.audit(
            &inner.state,
            Some(&actor.identity.staff_number),
            AuditAction::RecordOpened,
            Outcome::Success,
            format!("opened {record_id}"),
        )?;
        self.commit(&mut inner, txn)?;
        Ok((RecordMetadata::from(&record), plaintext))
    }

    /// Record metadata, available while the vault is locked.
    pub fn list_records(&self, session_id: &SessionId, filter: &RecordFilter) -> Result<Vec<RecordMetadata>> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.actor(&inner.state, session_id, now)?;
        self.authorize(&mut inner, &actor, Action::ListRecords, now)?;
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        self.commit(&mut inner, txn)?;
        Ok(inner
            .state
            .records
            .values()
            .filter(|r| filter.matches(r))
            .map(RecordMetadata::from)
            .collect())
    }

    /// Permanently revokes the master key. Requires an Admin session and
    /// the confirmation code mailed by [`Service::request_lockdown_code`].
    pub fn lockdown(&self, session_id: &SessionId, confirmation_code: &str) -> Result<VaultStatus> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.actor(&inner.state, session_id, now)?;
        self.authorize(&mut inner, &actor, Action::Lockdown, now)?;
        if inner.state.tombstone.is_some() {
            return Err(Error::AlreadyLocked);
        }
        let token = live_token_of(&inner.state, session_id)
            .filter(|t| t.purpose == TokenPurpose::Lockdown && t.is_live(now) && t.matches(confirmation_code))
            .cloned();
        let Some(mut token) = token else {
            return self.record_refusal(
                &mut inner,
                &actor,
                AuditAction::Lockdown,
                "confirmation rejected",
                Error::BadConfirmation,
                now,
            );
        };
        token.consumed = true;
        let staff = actor.identity.staff_number.clone();
        let mut txn = Txn::new(now);
        txn.push(Record::Token(token));
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.push(Record::Tombstone(Tombstone {
            revoked_at: txn.now,
            revoked_by: staff.clone(),
        }));
        txn.audit(
            &inner.state,
            Some(&staff),
            AuditAction::Lockdown,
            Outcome::Success,
            "master key revoked",
        )?;
        let revoked_at = txn.now;
        self.commit(&mut inner, txn)?;
        inner.vault.revoke(revoked_at, staff);
        Ok(inner.vault.status())
    }
}
