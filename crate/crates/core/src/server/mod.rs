//! TCP front end that applies a model to frames sent by an external simulator.
//!
//! Each connection carries one session. Requests and replies are single JSON
//! lines (see [`WireMessage`]); every request gets exactly one reply.

mod client;
mod protocol;
mod session;

pub use client::{ClientError, PemClient};
pub use protocol::{ErrorCode, WireMessage, WireObject, WirePerceived};
pub use session::{Connection, FrameError, ModelRegistry, Session};

use std::net::{SocketAddr, ToSocketAddrs};
use std::sync::Arc;

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::sync::watch;

pub const DEFAULT_PORT: u16 = 9223;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("no models to serve")]
    NoModels,
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServerConfig {
    /// Stop the whole server when a client sends `shutdown`, instead of only
    /// closing that client's connection.
    pub remote_shutdown: bool,
}

/// Stops a running server; open sessions are closed after their current
/// request.
#[derive(Debug, Clone)]
pub struct ShutdownHandle(Arc<watch::Sender<bool>>);

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.0.send_replace(true);
    }
}

pub struct Server {
    listener: std::net::TcpListener,
    registry: Arc<ModelRegistry>,
    config: ServerConfig,
    shutdown: Arc<watch::Sender<bool>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs + std::fmt::Debug, registry: ModelRegistry, config: ServerConfig) -> Result<Self, ServerError> {
        if registry.is_empty() {
            return Err(ServerError::NoModels);
        }
        let listener = std::net::TcpListener::bind(&addr).map_err(|source| ServerError::Bind {
            addr: format!("{addr:?}"),
            source,
        })?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            registry: Arc::new(registry),
            config,
            shutdown: Arc::new(watch::channel(false).0),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        ShutdownHandle(self.shutdown.clone())
    }

    /// Serves on a new multi-threaded runtime until shut down.
    pub fn run(self) -> Result<(), ServerError> {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        rt.block_on(self.serve())
    }

    pub async fn serve(self) -> Result<(), ServerError> {
        let listener = tokio::net::TcpListener::from_std(self.listener)?;
        let mut stop = self.shutdown.subscribe();
        log::info!("serving {} model(s) on {}", self.registry.len(), listener.local_addr()?);
        loop {
            tokio::select! {
                _ = stop.wait_for(|s| *s) => break,
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        log::debug!("session from {peer}");
                        let registry = self.registry.clone();
                        let shutdown = self.shutdown.clone();
                        let config = self.config;
                        tokio::spawn(async move {
                            if let Err(e) = run_session(stream, registry, config, shutdown).await {
                                log::warn!("session {peer}: {e}");
                            }
                        });
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                },
            }
        }
        log::info!("server stopped");
        Ok(())
    }
}

async fn run_session(
    stream: TcpStream,
    registry: Arc<ModelRegistry>,
    config: ServerConfig,
    shutdown: Arc<watch::Sender<bool>>,
) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    let mut stop = shutdown.subscribe();
    let mut conn = Connection::new(registry);
    loop {
        let line = tokio::select! {
            _ = stop.wait_for(|s| *s) => break,
            line = lines.next_line() => line,
        };
        let line = match line {
            Ok(Some(l)) => l,
            Ok(None) => break,
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                let reply = WireMessage::error(ErrorCode::Malformed, "request is not valid UTF-8");
                write.write_all(reply.to_line().as_bytes()).await?;
                break;
            }
            Err(e) => return Err(e),
        };
        if line.trim().is_empty() {
            continue;
        }
        let reply = conn.handle_line(&line);
        write.write_all(reply.to_line().as_bytes()).await?;
        if conn.is_closed() {
            if config.remote_shutdown {
                shutdown.send_replace(true);
            }
            break;
        }
    }
    write.shutdown().await.ok();
    Ok(())
}
