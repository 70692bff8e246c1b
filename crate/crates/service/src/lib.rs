//! Session service: runs pipelines in the background, persists their event
//! logs and serves them over HTTP as NDJSON streams and CSV exports.

pub mod api;
pub mod registry;
pub mod store;

use std::sync::Arc;

use reqagent_core::clock::SystemClock;

pub use api::{router, AppState};
pub use registry::{ModelRegistry, ProviderMode, ServiceConfig};
pub use store::{SessionEvent, SessionState, SessionStore, SessionView};

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), String> {
    let clock = Arc::new(SystemClock);
    let store = SessionStore::open(&config.data_dir, clock.as_ref())
        .map_err(|e| format!("{}: {e}", config.data_dir.display()))?;
    let state = AppState {
        store: Arc::new(store),
        registry: config.registry(),
        gateway: config.gateway()?,
        clock,
    };
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| format!("bind {}: {e}", config.bind))?;
    eprintln!("listening on http://{}", config.bind);
    axum::serve(listener, router(state))
        .await
        .map_err(|e| e.to_string())
}
