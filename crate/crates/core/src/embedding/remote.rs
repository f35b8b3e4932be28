use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedder, EmbeddingVector};

/// Environment variable holding the embedding API key.
pub const EMBED_API_KEY_ENV: &str = "EPISODIC_EMBED_API_KEY";

/// HTTP embedding client speaking the common `/embeddings` wire format:
///
/// request  `{"model": "...", "input": "text"}`
/// response `{"data": [{"embedding": [f, ...]}]}`
///
/// Returned vectors are L2-normalized before use.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    max_in_flight: usize,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        timeout: Duration,
    ) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
            api_key: std::env::var(EMBED_API_KEY_ENV).ok(),
            max_in_flight: 4,
            client,
        })
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self.client.post(&self.endpoint).json(&EmbedRequest {
            model: &self.model,
            input: text,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EmbedError::ProviderUnavailable(format!(
                "status {}",
                resp.status()
            )));
        }
        let body: EmbedResponse = resp
            .json()
            .map_err(|e| EmbedError::BadResponse(e.to_string()))?;
        let raw = body
            .data
            .into_iter()
            .next()
            .ok_or_else(|| EmbedError::BadResponse("empty data array".into()))?
            .embedding;
        if raw.len() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                found: raw.len(),
            });
        }
        EmbeddingVector::normalize(&raw)
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    fn name(&self) -> &str {
        &self.model
    }
}
