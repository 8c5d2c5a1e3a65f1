//! Staged login: credentials (stage 1), mailed code (stage 2), and the
//! combined verification (stage 3) that both succeeded for one session.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{touched, Inner, Service, Txn};
use crate::audit::{AuditAction, Outcome};
use crate::auth::{generate_code, AuthSession, OneTimeToken, SessionId, SessionState, TokenId, TokenPurpose};
use crate::error::{Error, Result};
use crate::identity::{self, StaffNumber, Status};
use crate::journal::{MailMessageRecord, Record};
use crate::mail::{token_body, MailMessage, TOKEN_SUBJECT};
use crate::state::{State, DETAIL_BAD_CREDENTIALS, DETAIL_CODE_EXPIRED, DETAIL_CODE_MISMATCH};

/// Acknowledgement of a mailed code. Never contains the code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenReceipt {
    pub delivered_to: String,
    pub expires_at: DateTime<Utc>,
}

/// Why a counted failure happened.
enum Failure {
    Credentials,
    Mismatch,
    Expired,
}

impl Service {
    pub fn begin_session(&self) -> Result<AuthSession> {
        let now = self.now();
        let session = AuthSession::new(SessionId::generate(self.entropy.as_ref())?, now);
        let mut inner = self.inner.lock();
        let mut txn = Txn::new(now);
        txn.push(Record::Session(session.clone()));
        self.commit(&mut inner, txn)?;
        Ok(session)
    }

    /// Current view of a session; idle sessions read as `Terminated`.
    pub fn session(&self, session_id: &SessionId) -> Result<AuthSession> {
        let now = self.now();
        let inner = self.inner.lock();
        let mut s = inner
            .state
            .sessions
            .get(session_id)
            .cloned()
            .ok_or(Error::UnknownSession)?;
        s.state = s.effective_state(now, self.config.idle_timeout_secs);
        Ok(s)
    }

    /// Commits a single uncounted failure entry and returns `err`.
    fn refuse(
        &self,
        inner: &mut Inner,
        now: DateTime<Utc>,
        staff: Option<&StaffNumber>,
        action: AuditAction,
        detail: &str,
        err: Error,
    ) -> Result<AuthSession> {
        let mut txn = Txn::new(now);
        txn.audit(&inner.state, staff, action, Outcome::Failure, detail)?;
        self.commit(inner, txn)?;
        Err(err)
    }

    /// Looks up a session that must currently be in `expected`, auditing a
    /// refusal under `action` otherwise.
    fn session_in(
        &self,
        inner: &mut Inner,
        now: DateTime<Utc>,
        session_id: &SessionId,
        expected: &[SessionState],
        action: AuditAction,
    ) -> Result<AuthSession> {
        let Some(session) = inner.state.sessions.get(session_id).cloned() else {
            return self.refuse(inner, now, None, action, "unknown session", Error::UnknownSession);
        };
        let actual = session.effective_state(now, self.config.idle_timeout_secs);
        if !expected.contains(&actual) {
            return self.refuse(
                inner,
                now,
                session.staff_number.as_ref(),
                action,
                "wrong state",
                Error::WrongState { actual },
            );
        }
        Ok(session)
    }

    /// Stage 1. Exactly one audit entry per call, plus a `Suspend` entry when
    /// the failure crosses the lockout threshold.
    pub fn submit_credentials(
        &self,
        session_id: &SessionId,
        staff_number: &str,
        password: &str,
    ) -> Result<AuthSession> {
        const EXPECTED: &[SessionState] = &[SessionState::AwaitingCredentials];
        let staff = StaffNumber::parse(staff_number).ok();
        let credential = {
            let now = self.now();
            let mut inner = self.inner.lock();
            self.session_in(&mut inner, now, session_id, EXPECTED, AuditAction::LoginStep1)?;
            staff
                .as_ref()
                .and_then(|s| inner.state.identities.get(s))
                .map(|i| i.credential.clone())
        };

        let password_ok = match &credential {
            Some(c) => c.verify(password),
            None => {
                identity::dummy_verify(password, self.config.kdf);
                false
            }
        };

        let now = self.now();
        let mut inner = self.inner.lock();
        // The session may have moved while the KDF ran.
        let mut session = self.session_in(&mut inner, now, session_id, EXPECTED, AuditAction::LoginStep1)?;
        let identity = staff.as_ref().and_then(|s| inner.state.identities.get(s)).cloned();

        match identity {
            Some(id) if password_ok && id.status == Status::Active => {
                session.transition(SessionState::CredentialsVerified);
                session.staff_number = Some(id.staff_number.clone());
                session.last_activity = now;
                let mut txn = Txn::new(now);
                txn.push(Record::Session(session.clone()));
                txn.audit(
                    &inner.state,
                    Some(&id.staff_number),
                    AuditAction::LoginStep1,
                    Outcome::Success,
                    "credentials verified",
                )?;
                self.commit(&mut inner, txn)?;
                Ok(session)
            }
            Some(id) if password_ok && id.status == Status::Suspended => {
                let staff = id.staff_number.clone();
                self.refuse(
                    &mut inner,
                    now,
                    Some(&staff),
                    AuditAction::LoginStep1,
                    "identity suspended",
                    Error::IdentitySuspended,
                )
            }
            other => {
                let staff = other.map(|i| i.staff_number);
                self.fail_counted(&mut inner, now, session, staff, Failure::Credentials)
            }
        }
    }

    /// Records a failure that counts toward lockout: one audit entry, the
    /// session's counter, and suspension once the threshold is reached.
    fn fail_counted(
        &self,
        inner: &mut Inner,
        now: DateTime<Utc>,
        mut session: AuthSession,
        staff: Option<StaffNumber>,
        failure: Failure,
    ) -> Result<AuthSession> {
        let policy = self.config.lockout;
        let (action, detail, err) = match failure {
            Failure::Credentials => (AuditAction::LoginStep1, DETAIL_BAD_CREDENTIALS, Error::BadCredentials),
            Failure::Mismatch => (AuditAction::AccessGranted, DETAIL_CODE_MISMATCH, Error::TokenMismatch),
            Failure::Expired => (AuditAction::AccessGranted, DETAIL_CODE_EXPIRED, Error::TokenExpired),
        };
        session.failed_attempts += 1;
        session.last_activity = now;

        let mut txn = Txn::new(now);
        txn.audit(&inner.state, staff.as_ref(), action, Outcome::Failure, detail)?;

        let identity_count = staff
            .as_ref()
            .map_or(0, |s| inner.state.failures.would_reach(s, now, &policy));
        let identity_locked = identity_count >= policy.max_failures;
        let session_locked = session.failed_attempts >= policy.max_failures;

        if identity_locked {
            let staff = staff.expect("identity_count > 0 implies a staff number");
            let mut id = inner
                .state
                .identities
                .get(&staff)
                .cloned()
                .expect("counted identities exist");
            id.status = Status::Suspended;
            txn.push(Record::Identity(id));
            txn.audit(
                &inner.state,
                Some(&staff),
                AuditAction::Suspend,
                Outcome::Success,
                format!("suspended after {identity_count} failed attempts"),
            )?;
        }
        let result = if identity_locked || session_locked {
            self.stage_termination(&inner.state, &mut txn, &mut session);
            Err(Error::LockedOut)
        } else {
            Err(err)
        };
        txn.push(Record::Session(session));
        self.commit(inner, txn)?;
        result
    }

    /// Marks the session terminated and voids its live token, if any.
    fn stage_termination(&self, state: &State, txn: &mut Txn, session: &mut AuthSession) {
        if session.state != SessionState::Terminated {
            session.transition(SessionState::Terminated);
        }
        if let Some(token) = live_token_of(state, &session.session_id) {
            let mut t = token.clone();
            t.voided = true;
            txn.push(Record::Token(t));
        }
    }

    /// Issues a fresh token bound to `session`, voiding any previous one,
    /// and stages its mail delivery. Returns the receipt and the code (for
    /// the secrets guard only; it never leaves this module).
    fn stage_token(
        &self,
        state: &State,
        txn: &mut Txn,
        session: &AuthSession,
        staff: &StaffNumber,
        purpose: TokenPurpose,
    ) -> Result<(TokenReceipt, String)> {
        let now = txn.now;
        if let Some(prev) = live_token_of(state, &session.session_id) {
            let mut t = prev.clone();
            t.voided = true;
            txn.push(Record::Token(t));
        }
        let email = state
            .identities
            .get(staff)
            .map(|i| i.email.clone())
            .ok_or(Error::MailboxUnavailable)?;
        let mailbox = state.mailboxes.get(&email).ok_or(Error::MailboxUnavailable)?;

        let token_id = TokenId::generate(self.entropy.as_ref())?;
        let code = generate_code(self.entropy.as_ref())?;
        let ttl = self.config.token_ttl_secs;
        let body = token_body(&code, ttl);
        if let Some(relay) = &self.relay {
            relay
                .relay(&email, TOKEN_SUBJECT, &body)
                .map_err(|_| Error::MailboxUnavailable)?;
        }
        txn.push(Record::Token(OneTimeToken {
            code_digest: OneTimeToken::digest_code(&token_id, &code),
            token_id,
            staff_number: staff.clone(),
            purpose,
            issued_at: now,
            ttl_seconds: ttl,
            consumed: false,
            voided: false,
            bound_session: session.session_id.clone(),
        }));
        txn.push(Record::MailMessage(MailMessageRecord {
            email: email.clone(),
            message: MailMessage {
                message_id: mailbox.next_message_id(),
                delivered_at: now,
                subject: TOKEN_SUBJECT.to_owned(),
                body,
                read: false,
            },
        }));
        Ok((
            TokenReceipt {
                delivered_to: email,
                expires_at: now + Duration::seconds(i64::from(ttl)),
            },
            code,
        ))
    }

    /// Stage 2: mails a per-transaction code to the identity's intranet
    /// mailbox. Re-requesting voids the previous code.
    pub fn request_token(&self, session_id: &SessionId) -> Result<TokenReceipt> {
        const EXPECTED: &[SessionState] = &[SessionState::CredentialsVerified, SessionState::TokenIssued];
        let now = self.now();
        let mut inner = self.inner.lock();
        let mut session = self.session_in(&mut inner, now, session_id, EXPECTED, AuditAction::TokenIssued)?;
        let staff = session
            .staff_number
            .clone()
            .expect("verified sessions carry a staff number");

        let mut txn = Txn::new(now);
        match self.stage_token(&inner.state, &mut txn, &session, &staff, TokenPurpose::Login) {
            Ok((receipt, code)) => {
                if session.state != SessionState::TokenIssued {
                    session.transition(SessionState::TokenIssued);
                }
                session.last_activity = now;
                txn.push(Record::Session(session));
                txn.audit_guarded(
                    &inner.state,
                    Some(&staff),
                    AuditAction::TokenIssued,
                    Outcome::Success,
                    "code mailed",
                    &[&code],
                )?;
                self.commit(&mut inner, txn)?;
                Ok(receipt)
            }
            Err(Error::MailboxUnavailable) => {
                // Keep only the voiding of any previous token.
                txn.records.retain(|r| matches!(r, Record::Token(t) if t.voided));
                if session.state == SessionState::TokenIssued {
                    session.transition(SessionState::CredentialsVerified);
                }
                session.last_activity = now;
                txn.push(Record::Session(session));
                txn.audit(
                    &inner.state,
                    Some(&staff),
                    AuditAction::TokenIssued,
                    Outcome::Failure,
                    "mailbox unavailable",
                )?;
                self.commit(&mut inner, txn)?;
                Err(Error::MailboxUnavailable)
            }
            Err(e) => Err(e),
        }
    }

    /// Stage 3: checks the mailed code against the session's live token.
    /// Expiry is checked before the code itself.
    pub fn submit_token(&self, session_id: &SessionId, code: &str) -> Result<AuthSession> {
        const EXPECTED: &[SessionState] = &[SessionState::TokenIssued];
        let now = self.now();
        let mut inner = self.inner.lock();
        let mut session = self.session_in(&mut inner, now, session_id, EXPECTED, AuditAction::AccessGranted)?;
        let staff = session.staff_number.clone();
        let token = live_token_of(&inner.state, session_id)
            .filter(|t| t.purpose == TokenPurpose::Login)
            .cloned();

        let Some(mut token) = token else {
            return self.fail_counted(&mut inner, now, session, staff, Failure::Mismatch);
        };
        if token.is_expired(now) {
            return self.fail_counted(&mut inner, now, session, staff, Failure::Expired);
        }
        if !token.matches(code) {
            return self.fail_counted(&mut inner, now, session, staff, Failure::Mismatch);
        }
        token.consumed = true;
        session.transition(SessionState::Authenticated);
        session.access_granted_at = Some(now);
        session.last_activity = now;
        let mut txn = Txn::new(now);
        txn.push(Record::Token(token));
        txn.push(Record::Session(session.clone()));
        txn.audit(
            &inner.state,
            staff.as_ref(),
            AuditAction::AccessGranted,
            Outcome::Success,
            "access granted",
        )?;
        self.commit(&mut inner, txn)?;
        Ok(session)
    }

    /// Ends a session. Idempotent; a `Logout` entry is written only when the
    /// session had been authenticated.
    pub fn terminate_session(&self, session_id: &SessionId) -> Result<AuthSession> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let mut session = inner
            .state
            .sessions
            .get(session_id)
            .cloned()
            .ok_or(Error::UnknownSession)?;
        if session.state == SessionState::Terminated {
            return Ok(session);
        }
        let was_authenticated = session.state == SessionState::Authenticated;
        let idle = session.effective_state(now, self.config.idle_timeout_secs) == SessionState::Terminated;
        let mut txn = Txn::new(now);
        self.stage_termination(&inner.state, &mut txn, &mut session);
        if was_authenticated {
            txn.audit(
                &inner.state,
                session.staff_number.as_ref(),
                AuditAction::Logout,
                Outcome::Success,
                if idle { "session expired" } else { "logged out" },
            )?;
        }
        txn.push(Record::Session(session.clone()));
        self.commit(&mut inner, txn)?;
        Ok(session)
    }

    /// Mails a lockdown confirmation code to the requesting administrator.
    pub fn request_lockdown_code(&self, session_id: &SessionId) -> Result<TokenReceipt> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.actor(&inner.state, session_id, now)?;
        self.authorize(&mut inner, &actor, crate::policy::Action::Lockdown, now)?;
        if inner.state.tombstone.is_some() {
            return Err(Error::AlreadyLocked);
        }
        let mut txn = Txn::new(now);
        let staff = actor.identity.staff_number.clone();
        let (receipt, code) =
            self.stage_token(&inner.state, &mut txn, &actor.session, &staff, TokenPurpose::Lockdown)?;
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.audit_guarded(
            &inner.state,
            Some(&staff),
            AuditAction::TokenIssued,
            Outcome::Success,
            "lockdown confirmation code mailed",
            &[&code],
        )?;
        self.commit(&mut inner, txn)?;
        Ok(receipt)
    }

    /// The tokens of a session, newest first. Test and operator inspection.
    pub fn tokens_for(&self, session_id: &SessionId) -> Vec<OneTimeToken> {
        let inner = self.inner.lock();
        let mut out: Vec<_> = inner
            .state
            .tokens
            .values()
            .filter(|t| &t.bound_session == session_id)
            .cloned()
            .collect();
        out.sort_by(|a, b| b.issued_at.cmp(&a.issued_at));
        out
    }

    /// Whether the session currently holds a live token at this instant.
    pub fn has_live_token(&self, session_id: &SessionId) -> bool {
        let now = self.now();
        let inner = self.inner.lock();
        live_token_of(&inner.state, session_id).is_some_and(|t| t.is_live(now))
    }
}

pub(super) fn live_token_of<'a>(state: &'a State, session_id: &SessionId) -> Option<&'a OneTimeToken> {
    state
        .live_token
        .get(session_id)
        .and_then(|id| state.tokens.get(id))
        .filter(|t| !t.consumed && !t.voided)
}
