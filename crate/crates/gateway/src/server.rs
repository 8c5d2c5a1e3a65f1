use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use drlia_core::journal::FileJournal;
use drlia_core::vault::{MasterKey, VaultStatus};
use drlia_core::{Error, Service};
use tokio::net::TcpListener;
use tracing::{info, warn};

use crate::config::GatewayConfig;
use crate::error::GatewayError;
use crate::routes::{router, AppState};

/// Replays the journal at `config.journal` and loads the master key.
pub fn open_service(config: &GatewayConfig) -> Result<Service, GatewayError> {
    let key = config
        .master_key_file
        .as_deref()
        .map(MasterKey::from_file)
        .transpose()
        .map_err(GatewayError::MasterKey)?;
    let journal = FileJournal::open(&config.journal).map_err(|e| GatewayError::Journal {
        path: config.journal.clone(),
        reason: e.to_string(),
    })?;
    let svc = Service::builder()
        .config(config.service_config())
        .master_key(key)
        .open(Box::new(journal))
        .map_err(|e| match e {
            Error::JournalCorrupt { first_bad_seq, reason } => GatewayError::JournalCorrupt { first_bad_seq, reason },
            other => GatewayError::Service(other),
        })?;
    if svc.vault_status() == VaultStatus::KeyAbsent {
        warn!("no master key configured; records cannot be sealed or opened");
    }
    Ok(svc)
}

/// A replayed service bound to its listening socket, not yet serving.
pub struct Gateway {
    listener: TcpListener,
    svc: Arc<Service>,
    rate_limit: u32,
}

impl Gateway {
    pub async fn bind(config: &GatewayConfig) -> Result<Self, GatewayError> {
        let svc = Arc::new(open_service(config)?);
        let listener =
            TcpListener::bind((config.bind, config.port))
                .await
                .map_err(|e| GatewayError::PortUnavailable {
                    port: config.port,
                    reason: e.to_string(),
                })?;
        Ok(Self {
            listener,
            svc,
            rate_limit: config.rate_limit,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.svc
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), GatewayError> {
        let addr = self.listener.local_addr()?;
        let app = router(AppState::new(self.svc.clone(), self.rate_limit));
        info!(
            %addr,
            identities = self.svc.identity_count(),
            audit_entries = self.svc.audit_len(),
            "ready"
        );
        axum::serve(self.listener, app.into_make_service_with_connect_info::<SocketAddr>())
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}

/// Binds, replays and serves until Ctrl-C.
pub async fn serve(config: &GatewayConfig) -> Result<(), GatewayError> {
    Gateway::bind(config)
        .await?
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
