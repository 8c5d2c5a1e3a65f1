use thiserror::Error;

use crate::auth::SessionState;
use crate::identity::{Field, Role};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by service operations.
///
/// Several variants are returned *after* the service has committed an audit
/// entry (failed logins, denied actions); the error describes the outcome, not
/// an absence of side effects.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("staff number already registered")]
    DuplicateStaffNumber,
    #[error("email address already registered")]
    DuplicateEmail,
    #[error("malformed field: {0}")]
    MalformedField(Field),
    #[error("password must be at least {min} characters")]
    WeakPassword { min: usize },

    #[error("invalid staff number or password")]
    BadCredentials,
    #[error("identity is suspended")]
    IdentitySuspended,
    #[error("too many failed attempts; identity suspended")]
    LockedOut,
    #[error("session is not authenticated")]
    NotAuthenticated,
    #[error("administrator role required")]
    NotAdmin,
    #[error("role {0} may not perform this action")]
    Forbidden(Role),
    #[error("unknown staff number")]
    UnknownStaff,
    #[error("unknown session")]
    UnknownSession,
    #[error("operation not allowed in session state {actual}")]
    WrongState { actual: SessionState },
    #[error("one-time code does not match")]
    TokenMismatch,
    #[error("one-time code expired")]
    TokenExpired,

    #[error("mailbox unavailable")]
    MailboxUnavailable,
    #[error("unknown mailbox")]
    UnknownMailbox,
    #[error("invalid mail credentials")]
    BadMailCredentials,
    #[error("mailbox handle is stale")]
    StaleHandle,

    #[error("vault is locked")]
    VaultLocked,
    #[error("document exceeds {max} bytes")]
    OversizeDocument { max: usize },
    #[error("document is empty")]
    EmptyDocument,
    #[error("unknown record")]
    UnknownRecord,
    #[error("record failed authentication")]
    IntegrityFailure,
    #[error("confirmation code rejected")]
    BadConfirmation,
    #[error("vault already locked")]
    AlreadyLocked,
    #[error("master key does not match the sealed records")]
    MasterKeyMismatch,

    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("audit detail rejected: {0}")]
    RejectedDetail(&'static str),
    #[error("entropy source unavailable")]
    EntropyUnavailable,
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("journal corrupt at audit seq {first_bad_seq}: {reason}")]
    JournalCorrupt { first_bad_seq: u64, reason: String },
}

impl Error {
    /// Stable machine-readable code, used as `error_code` on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateStaffNumber => "DuplicateStaffNumber",
            Error::DuplicateEmail => "DuplicateEmail",
            Error::MalformedField(_) => "MalformedField",
            Error::WeakPassword { .. } => "WeakPassword",
            Error::BadCredentials => "BadCredentials",
            Error::IdentitySuspended => "IdentitySuspended",
            Error::LockedOut => "LockedOut",
            Error::NotAuthenticated => "NotAuthenticated",
            Error::NotAdmin => "NotAdmin",
            Error::Forbidden(_) => "Forbidden",
            Error::UnknownStaff => "UnknownStaff",
            Error::UnknownSession => "UnknownSession",
            Error::WrongState { .. } => "WrongState",
            Error::TokenMismatch => "TokenMismatch",
            Error::TokenExpired => "TokenExpired",
            Error::MailboxUnavailable => "MailboxUnavailable",
            Error::UnknownMailbox => "UnknownMailbox",
            Error::BadMailCredentials => "BadMailCredentials",
            Error::StaleHandle => "StaleHandle",
            Error::VaultLocked => "VaultLocked",
            Error::OversizeDocument { .. } => "OversizeDocument",
            Error::EmptyDocument => "EmptyDocument",
            Error::UnknownRecord => "UnknownRecord",
            Error::IntegrityFailure => "IntegrityFailure",
            Error::BadConfirmation => "BadConfirmation",
            Error::AlreadyLocked => "AlreadyLocked",
            Error::MasterKeyMismatch => "MasterKeyMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::RejectedDetail(_) => "RejectedDetail",
            Error::EntropyUnavailable => "EntropyUnavailable",
            Error::Storage(_) => "StorageFailure",
            Error::JournalCorrupt { .. } => "JournalCorrupt",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}
