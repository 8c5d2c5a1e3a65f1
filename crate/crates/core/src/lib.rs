//! Core of the examination records service.
//!
//! * [`identity`]: staff registration records and credential hashing.
//! * [`auth`]: the staged login session machine and one-time codes.
//! * [`mail`]: the intranet mailboxes that carry those codes.
//! * [`vault`]: envelope encryption of student records.
//! * [`audit`]: the hash-chained audit trail.
//! * [`journal`]: the append-only store everything is replayed from.
//! * [`stats`]: survey tabulation and hypothesis testing.
//!
//! [`Service`] ties the stateful parts together behind one API.

pub mod audit;
pub mod auth;
pub mod clock;
mod codec;
pub mod entropy;
pub mod error;
pub mod identity;
mod ids;
pub mod journal;
pub mod mail;
pub mod policy;
mod service;
mod state;
pub mod stats;
pub mod vault;

pub use error::{Error, Result};
pub use service::{
    journal_audit_entries, verify_journal, InboxMessage, Registration, Service, ServiceBuilder, ServiceConfig,
    TokenReceipt,
};
pub use state::StateSnapshot;
