//! Intranet mailboxes through which one-time codes reach their owners.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::auth::{is_code_shaped, CODE_LEN};
use crate::identity::CredentialRecord;

pub const TOKEN_SUBJECT: &str = "DRLIA access code";
pub const MAIL_PASSWORD_LEN: usize = 12;

/// Body of a code-delivery message.
pub fn token_body(code: &str, ttl_seconds: u32) -> String {
    format!("Your one-time code is: {code} (valid {ttl_seconds}s)")
}

/// Extracts the code from a body produced by [`token_body`].
pub fn parse_token_body(body: &str) -> Option<&str> {
    let rest = body.strip_prefix("Your one-time code is: ")?;
    let code = rest.get(..CODE_LEN)?;
    let tail = rest.get(CODE_LEN..)?;
    let ttl = tail.strip_prefix(" (valid ")?.strip_suffix("s)")?;
    (is_code_shaped(code) && !ttl.is_empty() && ttl.bytes().all(|b| b.is_ascii_digit())).then_some(code)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MailMessage {
    pub message_id: u64,
    pub delivered_at: DateTime<Utc>,
    pub subject: String,
    pub body: String,
    pub read: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mailbox {
    pub email: String,
    pub credential: CredentialRecord,
    #[serde(default)]
    pub messages: Vec<MailMessage>,
}

impl Mailbox {
    pub fn next_message_id(&self) -> u64 {
        self.messages.last().map_or(1, |m| m.message_id + 1)
    }
}

/// Outbound hook invoked for every delivery before the message is stored in
/// the intranet mailbox. A failing relay makes the delivery fail and nothing
/// is stored.
pub trait MailRelay: Send + Sync {
    fn relay(&self, email: &str, subject: &str, body: &str) -> Result<(), String>;
}
