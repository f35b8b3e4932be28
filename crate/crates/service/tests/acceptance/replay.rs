//! Replays recorded HTTP requests against the router and computes what the
//! same operation returns when done through the library directly.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde::Deserialize;
use serde_json::{json, Value};
use tower::ServiceExt;

use episodic_core::augment::{ingest_raw, read_segments};
use episodic_core::config::AppConfig;
use episodic_core::embedding::TrigramEmbedder;
use episodic_core::fixture;
use episodic_core::llm::ChatProvider;
use episodic_core::memory::{IngestOptions, MemoryStore, StoreMetadata};
use episodic_core::persona::{ChatSession, PersonaMode, StoreKind, Stores};
use episodic_core::ranking::{retrieve, RetrievalParams};
use episodic_service::{router, AppState, ServiceOptions};

const FIXTURES: &str = include_str!("../fixtures/requests.json");

#[derive(Debug, Deserialize)]
pub struct Recorded {
    pub name: String,
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub body: Option<Value>,
}

pub fn recorded() -> Vec<Recorded> {
    serde_json::from_str(FIXTURES).expect("request fixtures parse")
}

/// What the library says a request should produce.
#[derive(Debug, PartialEq)]
enum Expected {
    Ok(u16, Value),
    /// Status plus `error_code`, and the message when the library produced it.
    Err(u16, String, Option<String>),
}

struct Library {
    config: AppConfig,
    llm: Box<dyn ChatProvider>,
    embedder: TrigramEmbedder,
    stores: BTreeMap<String, (StoreKind, MemoryStore)>,
    sessions: BTreeMap<String, (ChatSession, Option<String>)>,
}

fn summary(id: &str, kind: StoreKind, store: &MemoryStore) -> Value {
    json!({
        "store_id": id,
        "kind": kind,
        "records": store.len(),
        "dimension": store.dimension(),
        "k": store.k(),
        "metadata": store.metadata(),
    })
}

fn status_of(code: &str) -> u16 {
    match code {
        "invalid_params" | "invalid_body" | "mode_mismatch" => 400,
        "not_found" | "nothing_to_explain" => 404,
        "empty_store" => 422,
        "provider_unavailable" => 502,
        "timeout" => 504,
        _ => 500,
    }
}

fn library_error(code: &str, message: String) -> Expected {
    Expected::Err(status_of(code), code.to_string(), Some(message))
}

fn not_found() -> Expected {
    Expected::Err(404, "not_found".into(), None)
}

impl Library {
    fn new(config: AppConfig) -> Self {
        let mut stores = BTreeMap::new();
        stores.insert(
            fixture::STORE_ID.to_string(),
            (StoreKind::Augmented, fixture::augmented_store()),
        );
        stores.insert(
            fixture::RAW_STORE_ID.to_string(),
            (StoreKind::Raw, fixture::raw_store()),
        );
        Self {
            llm: config.chat_provider().expect("stub provider"),
            config,
            embedder: TrigramEmbedder::new(),
            stores,
            sessions: BTreeMap::new(),
        }
    }

    fn expected(
        &mut self,
        method: &str,
        path: &str,
        body: Option<&Value>,
        api: &Value,
    ) -> Expected {
        let parts: Vec<&str> = path.trim_matches('/').split('/').collect();
        match (method, parts.as_slice()) {
            ("GET", ["stores"]) => Expected::Ok(
                200,
                Value::Array(
                    self.stores
                        .iter()
                        .map(|(id, (kind, s))| summary(id, *kind, s))
                        .collect(),
                ),
            ),
            ("GET", ["stores", id]) => match self.stores.get(*id) {
                Some((kind, s)) => Expected::Ok(200, summary(id, *kind, s)),
                None => not_found(),
            },
            ("POST", ["stores", id, "retrieve"]) => {
                let Some((_, store)) = self.stores.get(*id) else {
                    return not_found();
                };
                let body = body.expect("retrieve has a body");
                let query = body["query"].as_str().expect("query text");
                let params: RetrievalParams = match body.get("params") {
                    Some(p) => serde_json::from_value(p.clone()).expect("params parse"),
                    None => self.config.retrieval.clone(),
                };
                match retrieve(query, store, &params, &self.embedder) {
                    Ok(ex) => Expected::Ok(200, serde_json::to_value(ex).unwrap()),
                    Err(e) => library_error(e.code(), e.to_string()),
                }
            }
            ("POST", ["stores"]) => {
                let body = body.expect("create has a body");
                assert_eq!(body["kind"], "raw", "only raw creation is replayed");
                let corpus = body["corpus"].as_str().unwrap();
                let segments = read_segments(corpus.as_bytes()).expect("corpus parses");
                let store = ingest_raw(
                    &segments,
                    &self.embedder,
                    IngestOptions {
                        k: self.config.k,
                        dimension: None,
                        metadata: StoreMetadata {
                            created_at: 0,
                            source: "api:ingest-raw".into(),
                        },
                    },
                )
                .expect("raw ingest");
                // The id is assigned by the server; adopt it.
                let id = api["store"]["store_id"].as_str().unwrap_or("?").to_string();
                let out = json!({ "store": summary(&id, StoreKind::Raw, &store), "failures": [] });
                self.stores.insert(id, (StoreKind::Raw, store));
                Expected::Ok(201, out)
            }
            ("POST", ["sessions"]) => {
                let body = body.expect("session has a body");
                let mode: PersonaMode = serde_json::from_value(body["mode"].clone()).unwrap();
                let store_id = mode.store_kind().map(|kind| {
                    match kind {
                        StoreKind::Raw => fixture::RAW_STORE_ID,
                        StoreKind::Augmented => fixture::STORE_ID,
                    }
                    .to_string()
                });
                let id = api["session_id"].as_str().unwrap_or("?").to_string();
                let session = ChatSession::new(
                    id.clone(),
                    self.config.profile(),
                    mode,
                    self.config.retrieval.clone(),
                )
                .expect("valid session");
                let view = view(&session, &store_id);
                self.sessions.insert(id, (session, store_id));
                Expected::Ok(201, view)
            }
            ("GET", ["sessions", id]) => match self.sessions.get(*id) {
                Some((s, store)) => Expected::Ok(200, view(s, store)),
                None => not_found(),
            },
            ("POST", ["sessions", id, "messages"]) => {
                let Some((session, store_id)) = self.sessions.get_mut(*id) else {
                    return not_found();
                };
                let text = body.expect("message body")["text"].as_str().unwrap();
                let store = store_id.as_ref().map(|s| &self.stores[s]);
                let stores = Stores {
                    raw: store.filter(|(k, _)| *k == StoreKind::Raw).map(|(_, s)| s),
                    augmented: store
                        .filter(|(k, _)| *k == StoreKind::Augmented)
                        .map(|(_, s)| s),
                };
                match session.answer(text, stores, &*self.llm, &self.embedder) {
                    Ok(a) => Expected::Ok(
                        200,
                        json!({
                            "session_id": id,
                            "text": a.text,
                            "explanation": a.explanation,
                            "no_entry_point": a.no_entry_point,
                            "included_scene_ids": a.context.included_scene_ids,
                            "context_sections": a.context.sections,
                        }),
                    ),
                    Err(e) => library_error(e.code(), e.to_string()),
                }
            }
            ("GET", ["sessions", id, "explanations", "latest"]) => match self.sessions.get(*id) {
                Some((s, _)) => match s.explain_last() {
                    Ok(ex) => Expected::Ok(200, serde_json::to_value(ex).unwrap()),
                    Err(e) => library_error(e.code(), e.to_string()),
                },
                None => not_found(),
            },
            _ => panic!("no library equivalent for {method} {path}"),
        }
    }
}

fn view(session: &ChatSession, store_id: &Option<String>) -> Value {
    json!({
        "session_id": session.id,
        "mode": session.mode,
        "store_id": store_id,
        "profile": session.profile,
        "params": session.params,
        "history": session.history(),
    })
}

/// Latency is wall-clock time and differs between any two runs.
fn strip_timing(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("retrieval_latency_ms");
    }
    v
}

fn observed(status: u16, body: Value) -> Expected {
    if status >= 400 {
        let message = body["message"].as_str().map(str::to_string);
        Expected::Err(
            status,
            body["error_code"].as_str().unwrap_or("").to_string(),
            message,
        )
    } else {
        Expected::Ok(status, strip_timing(body))
    }
}

/// Replays every fixture; returns the number of matches and a description
/// of each mismatch.
pub fn run() -> (usize, Vec<String>) {
    let config = AppConfig::default();
    let state = AppState::new(ServiceOptions {
        config: config.clone(),
        store_dir: None,
        preload_fixture: true,
        created_at: Some(0),
    })
    .expect("service state");
    let app = router(Arc::new(state));
    let mut library = Library::new(config);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .expect("runtime");

    let mut last_store = String::new();
    let mut last_session = String::new();
    let mut matched = 0;
    let mut mismatches = Vec::new();
    for rec in recorded() {
        let path = rec
            .path
            .replace("{store}", &last_store)
            .replace("{session}", &last_session);
        let request = Request::builder()
            .method(rec.method.as_str())
            .uri(&path)
            .header("content-type", "application/json")
            .body(match &rec.body {
                Some(b) => Body::from(b.to_string()),
                None => Body::empty(),
            })
            .unwrap();
        let (status, body) = runtime.block_on(async {
            let resp = app.clone().oneshot(request).await.unwrap();
            let status = resp.status().as_u16();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            (
                status,
                serde_json::from_slice::<Value>(&bytes).unwrap_or(Value::Null),
            )
        });
        if let Some(id) = body["store"]["store_id"].as_str() {
            last_store = id.to_string();
        }
        if let Some(id) = body["session_id"].as_str() {
            last_session = id.to_string();
        }
        let expected = library.expected(&rec.method, &path, rec.body.as_ref(), &body);
        let got = observed(status, body);
        let agrees = match (&expected, &got) {
            (Expected::Err(s, c, None), Expected::Err(s2, c2, _)) => s == s2 && c == c2,
            _ => expected == got,
        };
        if agrees {
            matched += 1;
        } else {
            mismatches.push(format!(
                "{}: service {got:?} vs library {expected:?}",
                rec.name
            ));
        }
    }
    (matched, mismatches)
}
