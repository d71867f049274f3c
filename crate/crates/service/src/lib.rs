//! HTTP API over an immutable snapshot of the election catalog and boundary
//! geometry.
//!
//! Requests read the current snapshot through an atomic pointer and never
//! block each other; `POST /api/reload` builds a fresh snapshot off the
//! request path and swaps it in.

mod api;
mod config;
mod snapshot;

use std::path::PathBuf;

pub use api::{router, ApiError, AppState, DEFAULT_MAP_HEIGHT, DEFAULT_MAP_WIDTH, MAX_MAP_SIZE};
pub use config::{ServiceConfig, CONFIG_ENV};
pub use snapshot::{load_geometry, Snapshot};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("startup validation failed for {path}: {reason}")]
    StartupValidation { path: PathBuf, reason: String },
    #[error("bind address {0:?} does not resolve")]
    InvalidBindAddress(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the first snapshot and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let addr = config.validate()?;
    let snapshot = tokio::task::spawn_blocking({
        let config = config.clone();
        move || Snapshot::load(&config, 1)
    })
    .await
    .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.to_string(), source })?;
    tracing::info!(%addr, "listening");
    let app = router(AppState::new(snapshot, Some(config)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServiceConfig) -> Result<(), ServiceError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(config))
}
