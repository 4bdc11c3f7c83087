// SPDX-License-Identifier: MIT OR Apache-2.0

//! HTTP/JSON front end for the concept-transplant engine.
//!
//! The router owns two miners (a vision-language model for parsing and
//! rewriting tasks, a language model for stimuli), an embedding client and
//! an in-memory registry of dictionaries keyed by content hash. All numeric
//! work runs on the blocking pool.

mod api_error;
mod routes;
mod state;

use std::net::SocketAddr;

use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub use api_error::{status_for, ApiError};
pub use routes::router;
pub use state::AppState;

/// Serves `state` on an already-bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves in the background, returning the bound address.
pub async fn spawn(addr: SocketAddr, state: AppState) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = serve(listener, state).await {
            tracing::error!("service stopped: {e}");
        }
    });
    Ok((local, handle))
}
