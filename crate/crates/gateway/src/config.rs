use std::net::{IpAddr, Ipv4Addr};
use std::path::PathBuf;

use drlia_core::ServiceConfig;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_RATE_LIMIT: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub journal: PathBuf,
    /// Without a key file the vault starts locked: metadata is listed but
    /// nothing can be sealed or opened.
    pub master_key_file: Option<PathBuf>,
    pub token_ttl_secs: u32,
    /// Unauthenticated requests allowed per second per remote address.
    pub rate_limit: u32,
}

impl GatewayConfig {
    pub fn new(journal: impl Into<PathBuf>) -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            journal: journal.into(),
            master_key_file: None,
            token_ttl_secs: ServiceConfig::default().token_ttl_secs,
            rate_limit: DEFAULT_RATE_LIMIT,
        }
    }

    pub fn service_config(&self) -> ServiceConfig {
        ServiceConfig {
            token_ttl_secs: self.token_ttl_secs,
            ..ServiceConfig::default()
        }
    }
}
