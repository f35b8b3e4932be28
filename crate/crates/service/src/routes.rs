use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use episodic_core::augment::{ingest_raw, read_segments, run_pipeline, StageFailure};
use episodic_core::fixture;
use episodic_core::memory::{IngestOptions, MemoryStore, StoreMetadata};
use episodic_core::persona::{
    ChatSession, PersonaMode, PersonaProfile, SectionSizes, StoreKind, Stores, Turn,
};
use episodic_core::ranking::{retrieve, RetrievalExplanation, RetrievalParams};

use crate::error::ApiError;
use crate::state::{AppState, JobState, JobStatus, SessionSlot, StoreSummary};

/// Corpora above this many segments are augmented as a background job.
pub const SYNC_SEGMENT_LIMIT: usize = 200;

const BODY_LIMIT: usize = 64 * 1024 * 1024;

type Shared = State<Arc<AppState>>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request("invalid_body", e.to_string()).with_details(json!({ "path": path }))
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateStoreRequest {
    #[serde(default = "default_store_kind")]
    pub kind: StoreKind,
    /// Biography segments as JSONL, one `{id, source_text, ordinal}` per line.
    pub corpus: String,
    /// Run as a background job even for a small corpus.
    #[serde(default, rename = "async")]
    pub run_async: bool,
}

fn default_store_kind() -> StoreKind {
    StoreKind::Augmented
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateStoreResponse {
    pub store: StoreSummary,
    /// Stage failures tolerated under the failure threshold.
    pub failures: Vec<StageFailure>,
}

/// Builds a store exactly as the library would, without registering it.
pub fn build_store(
    state: &AppState,
    kind: StoreKind,
    segments: &[episodic_core::augment::BiographySegment],
) -> Result<(MemoryStore, Vec<StageFailure>), ApiError> {
    let metadata = StoreMetadata {
        created_at: state.creation_time(),
        source: match kind {
            StoreKind::Raw => "api:ingest-raw".into(),
            StoreKind::Augmented => "api:augment".into(),
        },
    };
    match kind {
        StoreKind::Augmented => {
            let config = state
                .config
                .pipeline_config(metadata)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let out = run_pipeline(segments, &*state.llm, &*state.embedder, &config)?;
            Ok((out.store, out.failures))
        }
        StoreKind::Raw => {
            let store = ingest_raw(
                segments,
                &*state.embedder,
                IngestOptions {
                    k: state.config.k,
                    dimension: Some(state.embedder.dimension()),
                    metadata,
                },
            )?;
            Ok((store, Vec::new()))
        }
    }
}

fn finish_store(
    state: &AppState,
    kind: StoreKind,
    segments: &[episodic_core::augment::BiographySegment],
) -> Result<CreateStoreResponse, ApiError> {
    let (store, failures) = build_store(state, kind, segments)?;
    let id = state.next_store_id();
    let entry = state.insert_store(&id, kind, store);
    state
        .persist(&entry)
        .map_err(|e| ApiError::internal(format!("saving store {id}: {e}")))?;
    tracing::info!(store_id = %id, records = entry.store.len(), "store created");
    Ok(CreateStoreResponse {
        store: StoreSummary::of(&id, kind, &entry.store),
        failures,
    })
}

async fn create_store(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateStoreRequest = parse_body(&body)?;
    let segments = read_segments(req.corpus.as_bytes())?;
    if segments.is_empty() {
        return Err(episodic_core::augment::AugmentError::EmptyCorpus.into());
    }
    if req.run_async || segments.len() > SYNC_SEGMENT_LIMIT {
        let job_id = state.next_id("job");
        state.jobs.write().expect("jobs lock").insert(
            job_id.clone(),
            JobStatus {
                job_id: job_id.clone(),
                status: JobState::Running,
                store: None,
                error: None,
            },
        );
        let job_state = state.clone();
        let id = job_id.clone();
        tokio::spawn(async move {
            let worker = job_state.clone();
            let result = blocking(move || finish_store(&worker, req.kind, &segments)).await;
            let mut jobs = job_state.jobs.write().expect("jobs lock");
            let job = jobs.get_mut(&id).expect("job registered");
            match result {
                Ok(done) => {
                    job.status = JobState::Succeeded;
                    job.store = Some(done.store);
                }
                Err(e) => {
                    job.status = JobState::Failed;
                    job.error = Some(e.body);
                }
            }
        });
        let status = state.jobs.read().expect("jobs lock")[&job_id].clone();
        return Ok((StatusCode::ACCEPTED, Json(status)).into_response());
    }
    let worker = state.clone();
    let done = blocking(move || finish_store(&worker, req.kind, &segments)).await?;
    Ok((StatusCode::CREATED, Json(done)).into_response())
}

async fn list_stores(State(state): Shared) -> Json<Vec<StoreSummary>> {
    let stores = state.stores.read().expect("stores lock");
    Json(
        stores
            .values()
            .map(|e| StoreSummary::of(&e.id, e.kind, &e.store))
            .collect(),
    )
}

async fn get_store(
    State(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<StoreSummary>, ApiError> {
    let entry = state
        .store(&id)
        .ok_or_else(|| ApiError::not_found("store", &id))?;
    Ok(Json(StoreSummary::of(&entry.id, entry.kind, &entry.store)))
}

async fn get_job(
    State(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<JobStatus>, ApiError> {
    state
        .jobs
        .read()
        .expect("jobs lock")
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveRequest {
    pub query: String,
    /// Missing fields take their defaults; the whole object defaults to the
    /// service's configured parameters.
    #[serde(default)]
    pub params: Option<RetrievalParams>,
}

async fn retrieve_store(
    State(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<RetrievalExplanation>, ApiError> {
    let entry = state
        .store(&id)
        .ok_or_else(|| ApiError::not_found("store", &id))?;
    let req: RetrieveRequest = parse_body(&body)?;
    let params = req.params.unwrap_or_else(|| state.config.retrieval.clone());
    params.validate()?;
    let embedder = state.embedder.clone();
    blocking(move || Ok(retrieve(&req.query, &entry.store, &params, &*embedder)?))
        .await
        .map(Json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub mode: PersonaMode,
    /// Store to retrieve from; defaults to the fixture store of the kind the
    /// mode needs. Ignored in baseline mode.
    #[serde(default)]
    pub store_id: Option<String>,
    #[serde(default)]
    pub profile: Option<PersonaProfile>,
    #[serde(default)]
    pub params: Option<RetrievalParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub mode: PersonaMode,
    pub store_id: Option<String>,
    pub profile: PersonaProfile,
    pub params: RetrievalParams,
    pub history: Vec<Turn>,
}

impl SessionView {
    fn of(session: &ChatSession, store_id: Option<String>) -> Self {
        Self {
            session_id: session.id.clone(),
            mode: session.mode,
            store_id,
            profile: session.profile.clone(),
            params: session.params.clone(),
            history: session.history().to_vec(),
        }
    }
}

async fn create_session(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let store = match req.mode.store_kind() {
        None => None,
        Some(kind) => {
            let id = req.store_id.clone().unwrap_or_else(|| {
                match kind {
                    StoreKind::Raw => fixture::RAW_STORE_ID,
                    StoreKind::Augmented => fixture::STORE_ID,
                }
                .to_string()
            });
            let entry = state
                .store(&id)
                .ok_or_else(|| ApiError::not_found("store", &id))?;
            if entry.kind != kind {
                return Err(ApiError::bad_request(
                    "mode_mismatch",
                    format!(
                        "{} mode needs a {kind:?} store but {id:?} is {:?}",
                        req.mode.as_str(),
                        entry.kind
                    )
                    .to_lowercase(),
                ));
            }
            Some(entry)
        }
    };
    let profile = req.profile.unwrap_or_else(|| state.config.profile());
    let params = req.params.unwrap_or_else(|| state.config.retrieval.clone());
    let id = state.next_id("session");
    let session = ChatSession::new(id.clone(), profile, req.mode, params)?;
    let view = SessionView::of(&session, store.as_ref().map(|s| s.id.clone()));
    state.sessions.write().expect("sessions lock").insert(
        id,
        Arc::new(SessionSlot {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            store,
        }),
    );
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(
    State(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state
        .session(&id)
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let session = slot.session.try_lock().map_err(|_| busy(&id))?;
    Ok(Json(SessionView::of(
        &session,
        slot.store.as_ref().map(|s| s.id.clone()),
    )))
}

fn busy(id: &str) -> ApiError {
    ApiError::new(
        StatusCode::CONFLICT,
        "session_busy",
        format!("session {id:?} is already answering a message"),
    )
    .with_details(json!({ "session_id": id }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageResponse {
    pub session_id: String,
    pub text: String,
    pub explanation: Option<RetrievalExplanation>,
    pub no_entry_point: bool,
    pub included_scene_ids: Vec<String>,
    pub context_sections: SectionSizes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_latency_ms: Option<f64>,
}

async fn post_message(
    State(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MessageResponse>, ApiError> {
    let slot = state
        .session(&id)
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let req: MessageRequest = parse_body(&body)?;
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request(
            "empty_message",
            "message text is empty",
        ));
    }
    let mut session = slot
        .session
        .clone()
        .try_lock_owned()
        .map_err(|_| busy(&id))?;
    let worker = state.clone();
    blocking(move || {
        let store = slot.store.as_ref().map(|e| &e.store);
        let kind = slot.store.as_ref().map(|e| e.kind);
        let stores = Stores {
            raw: store.filter(|_| kind == Some(StoreKind::Raw)),
            augmented: store.filter(|_| kind == Some(StoreKind::Augmented)),
        };
        let answer = session.answer(&req.text, stores, &*worker.llm, &*worker.embedder)?;
        Ok(MessageResponse {
            session_id: session.id.clone(),
            text: answer.text,
            explanation: answer.explanation,
            no_entry_point: answer.no_entry_point,
            included_scene_ids: answer.context.included_scene_ids,
            context_sections: answer.context.sections,
            retrieval_latency_ms: answer.retrieval_latency.map(|d| d.as_secs_f64() * 1000.0),
        })
    })
    .await
    .map(Json)
}

async fn latest_explanation(
    State(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<RetrievalExplanation>, ApiError> {
    let slot = state
        .session(&id)
        .ok_or_else(|| ApiError::not_found("session", &id))?;
    let session = slot.session.try_lock().map_err(|_| busy(&id))?;
    Ok(Json(session.explain_last()?.clone()))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn require_bearer(State(state): Shared, request: Request, next: Next) -> Response {
    let Some(token) = &state.config.bearer_token else {
        return next.run(request).await;
    };
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token.as_str()) {
        next.run(request).await
    } else {
        ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong bearer token",
        )
        .into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/stores", get(list_stores).post(create_store))
        .route("/stores/{id}", get(get_store))
        .route("/stores/{id}/retrieve", post(retrieve_store))
        .route("/jobs/{id}", get(get_job))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route(
            "/sessions/{id}/explanations/latest",
            get(latest_explanation),
        )
        .fallback(fallback)
        .layer(middleware::from_fn_with_state(
            state.clone(),
            require_bearer,
        ))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(CorsLayer::permissive())
        .with_state(state)
}
