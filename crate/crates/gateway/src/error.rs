use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use drlia_core::Error;
use serde_json::json;
use tracing::error;

/// Status code for a service error.
pub fn status_for(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        MalformedField(_)
        | WeakPassword { .. }
        | InvalidInput(_)
        | EmptyDocument
        | OversizeDocument { .. }
        | RejectedDetail(_) => StatusCode::BAD_REQUEST,
        BadCredentials | NotAuthenticated | TokenMismatch | TokenExpired | BadMailCredentials | StaleHandle
        | UnknownMailbox | BadConfirmation => StatusCode::UNAUTHORIZED,
        NotAdmin | Forbidden(_) | IdentitySuspended => StatusCode::FORBIDDEN,
        UnknownStaff | UnknownSession | UnknownRecord => StatusCode::NOT_FOUND,
        DuplicateStaffNumber | DuplicateEmail | AlreadyLocked | WrongState { .. } => StatusCode::CONFLICT,
        VaultLocked => StatusCode::LOCKED,
        LockedOut => StatusCode::TOO_MANY_REQUESTS,
        MailboxUnavailable
        | IntegrityFailure
        | MasterKeyMismatch
        | EntropyUnavailable
        | Storage(_)
        | JournalCorrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// Anything a handler can fail with.
#[derive(Debug)]
pub enum ApiError {
    Service(Error),
    Malformed(String),
    NotFound,
    MethodNotAllowed,
    RateLimited,
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Service(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Service(e) => status_for(e),
            ApiError::Malformed(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound => StatusCode::NOT_FOUND,
            ApiError::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            ApiError::RateLimited => StatusCode::TOO_MANY_REQUESTS,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Service(e) => e.code(),
            ApiError::Malformed(_) => "Malformed",
            ApiError::NotFound => "NotFound",
            ApiError::MethodNotAllowed => "MethodNotAllowed",
            ApiError::RateLimited => "RateLimited",
            ApiError::Internal(_) => "Internal",
        }
    }

    /// Client-facing text. Server-side failures are logged, not echoed.
    pub fn message(&self) -> String {
        match self {
            ApiError::Service(Error::Storage(_)) => "storage failure; the operation was not performed".into(),
            ApiError::Service(e) => e.to_string(),
            ApiError::Malformed(why) => format!("malformed request: {why}"),
            ApiError::NotFound => "no such resource".into(),
            ApiError::MethodNotAllowed => "method not allowed".into(),
            ApiError::RateLimited => "too many requests".into(),
            ApiError::Internal(_) => "internal error".into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            error!(error = ?self, "request failed");
        }
        let body = json!({ "error_code": self.code(), "message": self.message() });
        (status, Json(body)).into_response()
    }
}

/// Reasons the gateway cannot start.
#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("journal corrupt at audit seq {first_bad_seq}: {reason}")]
    JournalCorrupt { first_bad_seq: u64, reason: String },
    #[error("port {port} unavailable: {reason}")]
    PortUnavailable { port: u16, reason: String },
    #[error("cannot open journal {}: {reason}", path.display())]
    Journal { path: PathBuf, reason: String },
    #[error("master key file: {0}")]
    MasterKey(Error),
    #[error(transparent)]
    Service(Error),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}
