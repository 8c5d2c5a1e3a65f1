use chrono::Timelike;
use zeroize::Zeroizing;

use super::{touched, Service, Txn};
use crate::audit::{AuditAction, Outcome};
use crate::auth::SessionId;
use crate::entropy::random_array;
use crate::error::{Error, Result};
use crate::identity::{
    self, CredentialRecord, IdentitySummary, RegistrationForm, Role, StaffIdentity, StaffNumber, Status,
};
use crate::journal::{MailboxRecord, Record};
use crate::mail::MAIL_PASSWORD_LEN;
use crate::policy::Action;
use crate::state::State;

/// Result of a registration. The mail password is shown exactly once.
#[derive(Debug, Clone)]
pub struct Registration {
    pub identity: IdentitySummary,
    pub mail_password: Zeroizing<String>,
}

fn check_unique(state: &State, staff: &StaffNumber, email: &str) -> Result<()> {
    if state.identities.contains_key(staff) {
        return Err(Error::DuplicateStaffNumber);
    }
    if state.email_index.contains_key(email) || state.mailboxes.contains_key(email) {
        return Err(Error::DuplicateEmail);
    }
    Ok(())
}

impl Service {
    fn mail_password(&self) -> Result<Zeroizing<String>> {
        // One byte per symbol; 256 is a multiple of 32 so `% 32` is uniform.
        let raw: Zeroizing<[u8; MAIL_PASSWORD_LEN]> = Zeroizing::new(random_array(self.entropy.as_ref())?);
        Ok(Zeroizing::new(
            raw.iter()
                .map(|b| crate::auth::CODE_ALPHABET[usize::from(b % 32)] as char)
                .collect(),
        ))
    }

    /// Registers a staff member as `PendingApproval` / `ReadOnly` and
    /// provisions their intranet mailbox.
    pub fn register(&self, form: &RegistrationForm) -> Result<Registration> {
        let valid = form.validate()?;
        check_unique(&self.inner.lock().state, &valid.staff_number, &valid.email)?;

        let kdf = self.config.kdf;
        let credential = CredentialRecord::derive(&valid.password, kdf, self.entropy.as_ref())?;
        let mail_password = self.mail_password()?;
        let mail_credential = CredentialRecord::derive(&mail_password, kdf, self.entropy.as_ref())?;

        let now = self.now();
        let mut inner = self.inner.lock();
        // Re-checked under the lock: concurrent registrations of the same
        // number or address cannot both pass.
        check_unique(&inner.state, &valid.staff_number, &valid.email)?;
        let identity = StaffIdentity {
            staff_number: valid.staff_number.clone(),
            name: valid.name,
            email: valid.email.clone(),
            contact_number: valid.contact_number,
            sex: valid.sex,
            role: Role::ReadOnly,
            status: Status::PendingApproval,
            credential,
            created_at: now.with_nanosecond(0).unwrap_or(now),
        };
        let summary = IdentitySummary::from(&identity);
        let mut txn = Txn::new(now);
        txn.push(Record::Identity(identity));
        txn.push(Record::Mailbox(MailboxRecord {
            email: valid.email,
            credential: mail_credential,
        }));
        txn.audit(
            &inner.state,
            Some(&valid.staff_number),
            AuditAction::Register,
            Outcome::Success,
            format!("registered {}", valid.staff_number),
        )?;
        self.commit(&mut inner, txn)?;
        Ok(Registration {
            identity: summary,
            mail_password,
        })
    }

    /// Activates `staff_number` with `role`. Admin sessions only.
    pub fn grant_privilege(&self, session_id: &SessionId, staff_number: &str, role: Role) -> Result<IdentitySummary> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let actor = self.actor(&inner.state, session_id, now)?;
        self.authorize(&mut inner, &actor, Action::GrantPrivilege, now)?;
        let target = StaffNumber::parse(staff_number)
            .ok()
            .and_then(|s| inner.state.identities.get(&s).cloned())
            .ok_or(Error::UnknownStaff)?;
        let mut updated = target;
        updated.status = Status::Active;
        updated.role = role;
        let summary = IdentitySummary::from(&updated);
        let mut txn = Txn::new(now);
        txn.push(Record::Session(touched(&actor.session, now)));
        txn.audit(
            &inner.state,
            Some(&actor.identity.staff_number),
            AuditAction::GrantPrivilege,
            Outcome::Success,
            format!("granted {role} to {}", updated.staff_number),
        )?;
        txn.push(Record::Identity(updated));
        self.commit(&mut inner, txn)?;
        Ok(summary)
    }

    /// Activates the first administrator. Refused once any active Admin
    /// exists; meant for offline use against a stopped service's journal.
    pub fn bootstrap_admin(&self, staff_number: &str) -> Result<IdentitySummary> {
        let now = self.now();
        let mut inner = self.inner.lock();
        let has_admin = inner
            .state
            .identities
            .values()
            .any(|i| i.role == Role::Admin && i.status == Status::Active);
        if has_admin {
            return Err(Error::InvalidInput("an active administrator already exists"));
        }
        let mut target = StaffNumber::parse(staff_number)
            .ok()
            .and_then(|s| inner.state.identities.get(&s).cloned())
            .ok_or(Error::UnknownStaff)?;
        target.status = Status::Active;
        target.role = Role::Admin;
        let summary = IdentitySummary::from(&target);
        let mut txn = Txn::new(now);
        txn.audit(
            &inner.state,
            Some(&target.staff_number),
            AuditAction::GrantPrivilege,
            Outcome::Success,
            format!("bootstrap granted Admin to {}", target.staff_number),
        )?;
        txn.push(Record::Identity(target));
        self.commit(&mut inner, txn)?;
        Ok(summary)
    }

    /// True iff the identity exists, is `Active`, and the password matches.
    /// Unknown identities cost one KDF evaluation like known ones.
    pub fn verify_password(&self, staff_number: &str, password: &str) -> bool {
        let credential = {
            let inner = self.inner.lock();
            StaffNumber::parse(staff_number)
                .ok()
                .and_then(|s| inner.state.identities.get(&s))
                .filter(|i| i.status == Status::Active)
                .map(|i| i.credential.clone())
        };
        match credential {
            Some(c) => c.verify(password),
            None => {
                identity::dummy_verify(password, self.config.kdf);
                false
            }
        }
    }

    pub fn identity(&self, staff_number: &str) -> Option<IdentitySummary> {
        let s = StaffNumber::parse(staff_number).ok()?;
        self.inner.lock().state.identities.get(&s).map(IdentitySummary::from)
    }

    pub fn identities(&self) -> Vec<IdentitySummary> {
        self.inner
            .lock()
            .state
            .identities
            .values()
            .map(IdentitySummary::from)
            .collect()
    }
}
