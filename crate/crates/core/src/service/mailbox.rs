use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{MailSession, Service, Txn};
use crate::auth::MailHandle;
use crate::error::{Error, Result};
use crate::identity;
use crate::journal::{MailMessageRecord, Record};
use crate::mail::MailMessage;

/// One message as shown to the mailbox owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboxMessage {
    pub message_id: u64,
    pub delivered_at: DateTime<Utc>,
    pub subject: String,
    pub body: String,
    pub read: bool,
}

impl From<&MailMessage> for InboxMessage {
    fn from(m: &MailMessage) -> Self {
        Self {
            message_id: m.message_id,
            delivered_at: m.delivered_at,
            subject: m.subject.clone(),
            body: m.body.clone(),
            read: m.read,
        }
    }
}

impl Service {
    /// Stores a message in an intranet mailbox.
    pub fn deliver(&self, email: &str, subject: &str, body: &str) -> Result<u64> {
        let email = email.to_ascii_lowercase();
        if let Some(relay) = &self.relay {
            relay
                .relay(&email, subject, body)
                .map_err(|_| Error::MailboxUnavailable)?;
        }
        let now = self.now();
        let mut inner = self.inner.lock();
        let mailbox = inner.state.mailboxes.get(&email).ok_or(Error::UnknownMailbox)?;
        let message_id = mailbox.next_message_id();
        let mut txn = Txn::new(now);
        txn.push(Record::MailMessage(MailMessageRecord {
            email,
            message: MailMessage {
                message_id,
                delivered_at: txn.now,
                subject: subject.to_owned(),
                body: body.to_owned(),
                read: false,
            },
        }));
        self.commit(&mut inner, txn)?;
        Ok(message_id)
    }

    /// Opens a mailbox with its own credential. Unknown addresses and wrong
    /// passwords are indistinguishable to the caller.
    pub fn login_mailbox(&self, email: &str, password: &str) -> Result<MailHandle> {
        let email = email.trim().to_ascii_lowercase();
        let credential = self
            .inner
            .lock()
            .state
            .mailboxes
            .get(&email)
            .map(|m| m.credential.clone());
        let ok = match credential {
            Some(c) => c.verify(password),
            None => {
                identity::dummy_verify(password, self.config.kdf);
                false
            }
        };
        if !ok {
            return Err(Error::BadMailCredentials);
        }
        let handle = MailHandle::generate(self.entropy.as_ref())?;
        let now = self.now();
        self.inner
            .lock()
            .handles
            .insert(handle.clone(), MailSession { email, last_used: now });
        Ok(handle)
    }

    pub fn logout_mailbox(&self, handle: &MailHandle) {
        self.inner.lock().handles.remove(handle);
    }

    /// Lists messages newest first and marks the returned ones read.
    pub fn read_inbox(&self, handle: &MailHandle, unread_only: bool) -> Result<Vec<InboxMessage>> {
        let now = self.now();
        let idle = Duration::seconds(i64::from(self.config.idle_timeout_secs));
        let mut inner = self.inner.lock();
        let email = match inner.handles.get(handle) {
            None => return Err(Error::UnknownMailbox),
            Some(s) if now - s.last_used > idle => {
                inner.handles.remove(handle);
                return Err(Error::StaleHandle);
            }
            Some(s) => s.email.clone(),
        };
        let messages: Vec<MailMessage> = inner
            .state
            .mailboxes
            .get(&email)
            .map(|m| {
                m.messages
                    .iter()
                    .rev()
                    .filter(|m| !unread_only || !m.read)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();

        let mut txn = Txn::new(now);
        for m in messages.iter().filter(|m| !m.read) {
            let mut read = m.clone();
            read.read = true;
            txn.push(Record::MailMessage(MailMessageRecord {
                email: email.clone(),
                message: read,
            }));
        }
        self.commit(&mut inner, txn)?;
        if let Some(s) = inner.handles.get_mut(handle) {
            s.last_used = now;
        }
        Ok(messages.iter().map(InboxMessage::from).collect())
    }
}
