use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use episodic_core::augment::AugmentError;
use episodic_core::embedding::EmbedError;
use episodic_core::llm::LlmError;
use episodic_core::persona::PersonaError;
use episodic_core::ranking::RankingError;

/// The body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub message: String,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error_code: code.to_string(),
                message: message.into(),
                details: json!({}),
            },
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = details;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no {what} with id {id:?}"),
        )
        .with_details(json!({ "id": id }))
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn embed_status(e: &EmbedError) -> StatusCode {
    match e {
        EmbedError::ProviderUnavailable(_) | EmbedError::BadResponse(_) => StatusCode::BAD_GATEWAY,
        _ => StatusCode::BAD_REQUEST,
    }
}

fn llm_status(e: &LlmError) -> StatusCode {
    match e {
        LlmError::Timeout { .. } => StatusCode::GATEWAY_TIMEOUT,
        LlmError::InvalidRequest(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_GATEWAY,
    }
}

impl From<RankingError> for ApiError {
    fn from(e: RankingError) -> Self {
        let status = match &e {
            RankingError::Embedding(inner) => embed_status(inner),
            RankingError::EmptyStore => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<PersonaError> for ApiError {
    fn from(e: PersonaError) -> Self {
        let status = match &e {
            PersonaError::Retrieval(inner) => return inner.clone().into(),
            PersonaError::Llm(inner) => llm_status(inner),
            PersonaError::NothingToExplain => StatusCode::NOT_FOUND,
            PersonaError::BudgetTooSmall { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            PersonaError::InvalidProfile(_)
            | PersonaError::ModeMismatch(_)
            | PersonaError::MissingStore(_) => StatusCode::BAD_REQUEST,
        };
        let details = match &e {
            PersonaError::BudgetTooSmall { required, budget } => {
                json!({ "required": required, "budget": budget })
            }
            _ => json!({}),
        };
        ApiError::new(status, e.code(), e.to_string()).with_details(details)
    }
}

impl From<AugmentError> for ApiError {
    fn from(e: AugmentError) -> Self {
        let message = e.to_string();
        match e {
            AugmentError::EmptyCorpus => ApiError::bad_request("empty_corpus", message),
            AugmentError::InvalidSegment { line, reason } => {
                ApiError::bad_request("invalid_segment", message)
                    .with_details(json!({ "line": line, "reason": reason }))
            }
            AugmentError::TooManyFailures {
                failed,
                total,
                threshold,
                failures,
            } => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "too_many_failures",
                message,
            )
            .with_details(json!({
                "failed": failed,
                "total": total,
                "threshold": threshold,
                "failures": failures,
            })),
            AugmentError::Lexicon { labels, reason } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "lexicon_failed", message)
                    .with_details(json!({ "labels": labels, "reason": reason }))
            }
            AugmentError::Stage(f) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "stage_failed", message)
                    .with_details(json!(f))
            }
            AugmentError::UnknownLabel(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_label", message)
            }
            AugmentError::Store(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_store", message)
            }
            AugmentError::Prompt(_) | AugmentError::Io(_) => ApiError::internal(message),
        }
    }
}
