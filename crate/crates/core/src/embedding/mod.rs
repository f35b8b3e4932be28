//! Text embeddings and the vector arithmetic used by retrieval.
//!
//! Every embedding that reaches a store is a unit-length `f32` vector. The
//! canonical similarity is [`dot`], which accumulates in `f64`; products of
//! two `f32` values are exact in `f64`, so only the summation rounds.
//! [`dot_f32`] is a faster approximation used to filter candidates before
//! the canonical score is computed, never as a final score.

mod remote;
mod trigram;

use std::collections::HashMap;
use std::sync::Mutex;

pub use remote::{RemoteEmbedder, EMBED_API_KEY_ENV};
pub use trigram::{TrigramEmbedder, TRIGRAM_DIMENSION};

use serde::{Deserialize, Serialize};

use crate::memory::NORM_TOLERANCE;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding is not unit length (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("embedding has no direction (zero or non-finite vector)")]
    Degenerate,
    #[error("malformed provider response: {0}")]
    BadResponse(String),
}

impl EmbedError {
    /// Stable snake_case identifier for error bodies and reports.
    pub fn code(&self) -> &'static str {
        match self {
            EmbedError::EmptyText => "empty_text",
            EmbedError::ProviderUnavailable(_) => "provider_unavailable",
            EmbedError::DimensionMismatch { .. } => "dimension_mismatch",
            EmbedError::NotNormalized { .. } => "not_normalized",
            EmbedError::Degenerate => "degenerate_embedding",
            EmbedError::BadResponse(_) => "bad_response",
        }
    }
}

/// A unit-norm embedding with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Wraps values that are already unit length.
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::Degenerate);
        }
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbedError::NotNormalized { norm });
        }
        Ok(Self(values))
    }

    /// Scales arbitrary finite values to unit length.
    pub fn normalize(values: &[f64]) -> Result<Self, EmbedError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(EmbedError::Degenerate);
        }
        Ok(Self(values.iter().map(|v| (v / norm) as f32).collect()))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = EmbedError;

    fn try_from(values: Vec<f32>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Produces embeddings for text.
///
/// Implementations must be deterministic: the same provider and text give the
/// same vector. A provider that cannot serve concurrent calls reports
/// `max_in_flight() == 1` and callers serialize access.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn max_in_flight(&self) -> usize {
        1
    }

    fn name(&self) -> &str;
}

/// Cosine similarity `a·b / (‖a‖‖b‖)`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    let denom = l2_norm(a.as_slice()) * l2_norm(b.as_slice());
    Ok(dot(a.as_slice(), b.as_slice()) / denom)
}

/// Canonical dot product: four `f64` lanes over fixed-size chunks, combined
/// in a fixed order. The summation order depends only on the length, so the
/// result is identical on every platform.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (rem_a, rem_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        for lane in 0..4 {
            acc[lane] += f64::from(x[lane]) * f64::from(y[lane]);
        }
    }
    let mut tail = 0.0;
    for (x, y) in rem_a.iter().zip(rem_b) {
        tail += f64::from(*x) * f64::from(*y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Fast single-precision dot product for candidate filtering.
/// Its absolute error on unit vectors is bounded by [`approx_margin`].
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let (rem_a, rem_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        for lane in 0..8 {
            acc[lane] += x[lane] * y[lane];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in rem_a.iter().zip(rem_b) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Upper bound on `|dot_f32(a, b) - dot(a, b)|` for (near) unit vectors of
/// dimension `dim`: each lane accumulates `dim / 8` rounded products, then
/// lanes and the tail combine in at most 12 further roundings.
pub(crate) fn approx_margin(dim: usize) -> f64 {
    let depth = (dim / 8 + 16) as f64;
    depth * f64::from(f32::EPSILON) * 1.01
}

pub fn l2_norm(values: &[f32]) -> f64 {
    dot(values, values).sqrt()
}

/// Caches embeddings in memory, keyed by exact text.
pub struct Memoized<E> {
    inner: E,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
}

impl<E: Embedder> Memoized<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<E: Embedder> Embedder for Memoized<E> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(text) {
            return Ok(hit.clone());
        }
        let v = self.inner.embed(text)?;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(text.to_string(), v.clone());
        Ok(v)
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
