//! HTTP/JSON facade over [`socproto_core::Engine`].
//!
//! Request and response bodies are the engine's own JSON formats. Errors use
//! [`ApiError`]. The acting collaborator is read from `X-Collaborator`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use socproto_core::{Clock, Engine, Id, Library, SystemClock};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;

mod error;
mod events;
mod extract;
mod routes;

pub use error::{status_for, ApiError};
pub use extract::COLLABORATOR_HEADER;
pub use routes::{router, Conclusion, FireRequest, RelationAdded, StartMetaRequest, StatusRequest};

const COMMIT_BUFFER: usize = 1024;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    commits: broadcast::Sender<Id>,
    shutdown: watch::Receiver<bool>,
}

#[derive(Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    /// Library directory; `None` keeps everything in memory.
    pub store: Option<PathBuf>,
    pub clock: Arc<dyn Clock>,
}

impl ServiceConfig {
    pub fn new(addr: SocketAddr) -> Self {
        Self { addr, store: None, clock: Arc::new(SystemClock) }
    }

    pub fn with_store(mut self, store: impl Into<PathBuf>) -> Self {
        self.store = Some(store.into());
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error("cannot open store: {0}")]
    Store(#[from] socproto_core::Error),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the engine for `config`, wiring commits into the event broadcast.
pub fn app_state(config: &ServiceConfig) -> Result<(AppState, watch::Sender<bool>), ServeError> {
    let (commits, _) = broadcast::channel(COMMIT_BUFFER);
    let sink = commits.clone();
    let mut builder = Engine::builder().clock(config.clock.clone()).on_commit(Arc::new(move |pid, _entry| {
        let _ = sink.send(pid.clone());
    }));
    if let Some(store) = &config.store {
        builder = builder.library(Library::open_dir(store)?);
    }
    let engine = Arc::new(builder.build()?);
    let (stop, shutdown) = watch::channel(false);
    Ok((AppState { engine, commits, shutdown }, stop))
}

/// A server running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: AppState,
    stop: watch::Sender<bool>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Stops accepting connections, ends open event streams and waits for
    /// in-flight requests to finish.
    pub async fn shutdown(self) -> Result<(), ServeError> {
        let _ = self.stop.send(true);
        self.task.await.map_err(|e| std::io::Error::other(e.to_string()))??;
        Ok(())
    }
}

pub async fn spawn(config: ServiceConfig) -> Result<RunningServer, ServeError> {
    let (state, stop) = app_state(&config)?;
    let listener =
        TcpListener::bind(config.addr).await.map_err(|source| ServeError::BindFailure { addr: config.addr, source })?;
    let addr = listener.local_addr()?;
    let app = router(state.clone());
    let mut signal = state.shutdown.clone();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = signal.wait_for(|stopped| *stopped).await;
            })
            .await
    });
    tracing::info!(%addr, "listening");
    Ok(RunningServer { addr, state, stop, task })
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(config: ServiceConfig, shutdown: impl std::future::Future<Output = ()>) -> Result<(), ServeError> {
    let server = spawn(config).await?;
    shutdown.await;
    tracing::info!("shutting down");
    server.shutdown().await
}
