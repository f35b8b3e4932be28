//! JSON-over-HTTP API for episodic stores, retrieval and persona chat.
//!
//! Every error response has the body `{error_code, message, details}`.
//! Messages to one session are serialized: a second message while the first
//! is in flight gets 409.

mod error;
mod routes;
mod state;

use std::sync::Arc;

pub use error::{ApiError, ErrorBody};
pub use routes::{
    build_store, router, CreateSessionRequest, CreateStoreRequest, CreateStoreResponse,
    MessageRequest, MessageResponse, RetrieveRequest, SessionView, SYNC_SEGMENT_LIMIT,
};
pub use state::{
    AppState, JobState, JobStatus, ServiceError, ServiceOptions, StoreEntry, StoreSummary,
};

/// Serves the API on `listener` until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
