//! HTTP/JSON front end for [`drlia_core::Service`].
//!
//! Every endpoint lives under `/api`. Sessions are presented as
//! `Authorization: Bearer <session_id>`; the intranet mailbox uses the same
//! header with its mail handle. Errors share one body shape,
//! `{"error_code": ..., "message": ...}`.

mod config;
mod error;
mod limiter;
mod routes;
mod server;

pub use config::GatewayConfig;
pub use error::{status_for, ApiError, GatewayError};
pub use limiter::RateLimiter;
pub use routes::{router, AppState};
pub use server::{open_service, serve, Gateway};
