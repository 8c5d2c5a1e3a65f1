//! Role to action permissions.

use serde::{Deserialize, Serialize};

use crate::identity::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    SealRecord,
    OpenRecord,
    ListRecords,
    GrantPrivilege,
    Lockdown,
    QueryAudit,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::SealRecord,
        Action::OpenRecord,
        Action::ListRecords,
        Action::GrantPrivilege,
        Action::Lockdown,
        Action::QueryAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::SealRecord => "seal_record",
            Action::OpenRecord => "open_record",
            Action::ListRecords => "list_records",
            Action::GrantPrivilege => "grant_privilege",
            Action::Lockdown => "lockdown",
            Action::QueryAudit => "query_audit",
        }
    }
}

pub fn permits(role: Role, action: Action) -> bool {
    match action {
        Action::OpenRecord | Action::ListRecords => true,
        Action::SealRecord => matches!(role, Role::Admin | Role::Officer),
        Action::GrantPrivilege | Action::Lockdown | Action::QueryAudit => role == Role::Admin,
    }
}
