//! HTTP/JSON service around the clearing engine.
//!
//! Stateless endpoints (`/v1/ptdf`, `/v1/check`, `/v1/audit`) take a network
//! in the request body. Sessions hold one market each; bids submitted to a
//! session are sequenced in arrival order.

mod error;
mod handlers;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use flexmarket_core::market::Market;
use parking_lot::{Mutex, RwLock};
use tokio::net::TcpListener;

pub use error::ApiError;

type Session = Arc<Mutex<Market>>;

/// Shared service state: the live sessions by id.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Session>>>,
}

impl AppState {
    fn session(&self, id: &str) -> Result<Session, ApiError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    Router::new()
        .route("/health", get(health))
        .route("/v1/ptdf", post(ptdf))
        .route("/v1/check", post(check))
        .route("/v1/audit", post(audit))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/bids", post(submit_bid))
        .route("/v1/sessions/{id}/bids/{bid_id}", axum::routing::delete(cancel_bid))
        .route("/v1/sessions/{id}/trades", get(trades))
        .route("/v1/sessions/{id}/snapshot", post(snapshot))
        .route("/v1/sessions/{id}/feasibility", post(feasibility))
        .route("/v1/sessions/{id}/audit", post(session_audit))
        .with_state(state)
}

/// Serves the API on `listener` until the future is dropped.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::default())).await
}

/// Binds `addr` and serves in a background task. Returns the bound address.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve(listener).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok(local)
}
