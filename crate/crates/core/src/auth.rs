//! Session state machine and one-time token primitives for the three-stage
//! login: credential check, mailed per-transaction code, and the combined
//! verification that both succeeded for the same session.
//!
//! ```text
//! AwaitingCredentials -> CredentialsVerified -> TokenIssued -> Authenticated
//!          \                    \                    \              \
//!           `--------------------`--------------------`--------------`--> Terminated
//! ```
//!
//! The orchestration lives in [`crate::service`]; this module holds the
//! types, transition rules and code generation.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::hex32;
use crate::entropy::{random_array, EntropySource};
use crate::error::Result;
use crate::identity::StaffNumber;
pub use crate::ids::{MailHandle, SessionId, TokenId};

/// 32 symbols: A-Z and 2-9 without the look-alikes O, 0, I and 1.
pub const CODE_ALPHABET: &[u8; 32] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";
pub const CODE_LEN: usize = 8;
pub const DEFAULT_TOKEN_TTL_SECS: u32 = 300;
pub const DEFAULT_IDLE_TIMEOUT_SECS: u32 = 30 * 60;

/// Draws an 8-symbol code. Each symbol consumes exactly 5 bits of a 40-bit
/// random draw, so every symbol is uniform over the alphabet.
pub fn generate_code(entropy: &dyn EntropySource) -> Result<String> {
    let bytes: [u8; 5] = random_array(entropy)?;
    let mut bits = bytes.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b));
    let mut code = [0u8; CODE_LEN];
    for slot in code.iter_mut().rev() {
        *slot = CODE_ALPHABET[(bits & 0x1f) as usize];
        bits >>= 5;
    }
    Ok(String::from_utf8(code.to_vec()).expect("alphabet is ascii"))
}

pub fn is_code_symbol(b: u8) -> bool {
    CODE_ALPHABET.contains(&b)
}

/// Whether `s` has the exact shape of a one-time code.
pub fn is_code_shaped(s: &str) -> bool {
    s.len() == CODE_LEN && s.bytes().all(is_code_symbol)
}

/// Codes are compared uppercased with surrounding whitespace removed.
pub fn normalize_code(s: &str) -> String {
    s.trim().to_ascii_uppercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    AwaitingCredentials,
    CredentialsVerified,
    TokenIssued,
    Authenticated,
    Terminated,
}

impl SessionState {
    /// Position along the login path; `None` for `Terminated`.
    pub fn stage(self) -> Option<u8> {
        match self {
            SessionState::AwaitingCredentials => Some(0),
            SessionState::CredentialsVerified => Some(1),
            SessionState::TokenIssued => Some(2),
            SessionState::Authenticated => Some(3),
            SessionState::Terminated => None,
        }
    }

    /// Legal transitions. Re-requesting a code keeps `TokenIssued`.
    pub fn can_transition_to(self, next: SessionState) -> bool {
        use SessionState::*;
        match (self, next) {
            (Terminated, _) => false,
            (_, Terminated) => true,
            (AwaitingCredentials, CredentialsVerified) => true,
            (CredentialsVerified, TokenIssued) => true,
            (TokenIssued, TokenIssued) => true,
            (TokenIssued, CredentialsVerified) => true,
            (TokenIssued, Authenticated) => true,
            _ => false,
        }
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthSession {
    pub session_id: SessionId,
    pub staff_number: Option<StaffNumber>,
    pub state: SessionState,
    pub created_at: DateTime<Utc>,
    pub last_activity: DateTime<Utc>,
    pub access_granted_at: Option<DateTime<Utc>>,
    pub failed_attempts: u32,
}

impl AuthSession {
    pub fn new(session_id: SessionId, now: DateTime<Utc>) -> Self {
        Self {
            session_id,
            staff_number: None,
            state: SessionState::AwaitingCredentials,
            created_at: now,
            last_activity: now,
            access_granted_at: None,
            failed_attempts: 0,
        }
    }

    /// State as seen at `now`: an idle session reads as `Terminated`.
    pub fn effective_state(&self, now: DateTime<Utc>, idle_timeout_secs: u32) -> SessionState {
        if self.state != SessionState::Terminated
            && now - self.last_activity > Duration::seconds(i64::from(idle_timeout_secs))
        {
            SessionState::Terminated
        } else {
            self.state
        }
    }

    /// Moves to `next`, panicking on an illegal edge. Callers check first.
    pub(crate) fn transition(&mut self, next: SessionState) {
        assert!(
            self.state.can_transition_to(next),
            "illegal session transition {} -> {}",
            self.state,
            next
        );
        self.state = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenPurpose {
    Login,
    Lockdown,
}

/// A per-transaction code. Only a salted digest of the code is kept; the
/// code itself exists in memory while being mailed and in the mail body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneTimeToken {
    pub token_id: TokenId,
    pub staff_number: StaffNumber,
    pub purpose: TokenPurpose,
    #[serde(with = "hex32")]
    pub code_digest: [u8; 32],
    pub issued_at: DateTime<Utc>,
    pub ttl_seconds: u32,
    pub consumed: bool,
    pub voided: bool,
    pub bound_session: SessionId,
}

impl OneTimeToken {
    pub fn digest_code(token_id: &TokenId, code: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"drlia-token-v1\0");
        h.update(token_id.as_str().as_bytes());
        h.update(b"\0");
        h.update(code.as_bytes());
        h.finalize().into()
    }

    /// Valid iff unconsumed, not voided and `now - issued_at <= ttl`.
    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        !self.consumed && !self.voided && !self.is_expired(now)
    }

    pub fn is_expired(&self, now: DateTime<Utc>) -> bool {
        now - self.issued_at > Duration::seconds(i64::from(self.ttl_seconds))
    }

    /// Constant-time comparison of `code` against the stored digest.
    pub fn matches(&self, code: &str) -> bool {
        use subtle::ConstantTimeEq;
        let candidate = Self::digest_code(&self.token_id, &normalize_code(code));
        candidate.ct_eq(&self.code_digest).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockoutAction {
    SuspendIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockoutPolicy {
    pub max_failures: u32,
    pub window_seconds: u32,
    pub action: LockoutAction,
}

impl Default for LockoutPolicy {
    fn default() -> Self {
        Self {
            max_failures: 5,
            window_seconds: 900,
            action: LockoutAction::SuspendIdentity,
        }
    }
}

impl LockoutPolicy {
    pub fn new(max_failures: u32, window_seconds: u32) -> Self {
        Self {
            max_failures: max_failures.max(1),
            window_seconds: window_seconds.max(1),
            action: LockoutAction::SuspendIdentity,
        }
    }
}

/// Recent authentication failures per identity. Rebuilt from the audit log
/// on replay, never persisted on its own.
#[derive(Debug, Default, Clone)]
pub(crate) struct FailureTracker {
    recent: HashMap<StaffNumber, VecDeque<DateTime<Utc>>>,
}

impl FailureTracker {
    /// Records a failure and returns the number of failures inside the window.
    pub fn record(&mut self, staff: &StaffNumber, at: DateTime<Utc>, policy: &LockoutPolicy) -> u32 {
        let window = Duration::seconds(i64::from(policy.window_seconds));
        let q = self.recent.entry(staff.clone()).or_default();
        q.push_back(at);
        while q.front().is_some_and(|t| at - *t > window) {
            q.pop_front();
        }
        q.len() as u32
    }

    /// Count that `record` would return for a failure at `at`.
    pub fn would_reach(&self, staff: &StaffNumber, at: DateTime<Utc>, policy: &LockoutPolicy) -> u32 {
        let window = Duration::seconds(i64::from(policy.window_seconds));
        let prior = self
            .recent
            .get(staff)
            .map_or(0, |q| q.iter().filter(|t| at - **t <= window).count());
        prior as u32 + 1
    }

    pub fn clear(&mut self, staff: &StaffNumber) {
        self.recent.remove(staff);
    }
}
