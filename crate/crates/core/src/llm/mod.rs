//! Chat-completion providers.
//!
//! [`ChatProvider`] is the only interface the pipeline and persona code see.
//! [`ScriptedStub`] replays canned texts deterministically; [`RemoteChatProvider`]
//! talks to an OpenAI-compatible `/chat/completions` endpoint.

mod remote;
pub(crate) mod structured;
mod stub;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use remote::{RemoteChatProvider, DEFAULT_TIMEOUT, LLM_API_KEY_ENV};
pub use structured::{
    complete_structured, extract_json, parse_structured, EmotionPair, ParseError, SchemaViolation,
    StructuredError, StructuredSchema, MAX_REASKS, REASK_INSTRUCTION,
};
pub use stub::{ScriptedStub, StubScript};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("chat provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("scripted stub has no responses left")]
    StubExhausted,
    #[error("scripted stub has no response for fingerprint {fingerprint}")]
    NoStubResponse { fingerprint: String },
    #[error("chat provider timed out after {seconds} s")]
    Timeout { seconds: u64 },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::InvalidRequest(_) => "invalid_request",
            LlmError::ProviderUnavailable(_) => "provider_unavailable",
            LlmError::StubExhausted => "stub_exhausted",
            LlmError::NoStubResponse { .. } => "no_stub_response",
            LlmError::Timeout { .. } => "timeout",
            LlmError::BadResponse(_) => "bad_response",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
}

impl ChatMessage {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    /// A single-turn request with default sampling settings.
    pub fn single(system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            system_text: system_text.into(),
            messages: vec![ChatMessage::user(user_text)],
            temperature: 0.0,
            max_output_tokens: 1024,
        }
    }

    /// Roles must alternate starting with the user and end on a user turn.
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} must be a non-negative number",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        if self.messages.last().map(|m| m.role) != Some(Role::User) {
            return Err(LlmError::InvalidRequest(
                "last message must come from the user".into(),
            ));
        }
        for (i, m) in self.messages.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            if m.role != expected {
                return Err(LlmError::InvalidRequest(format!(
                    "message {i} should be {} but is {}",
                    expected.as_str(),
                    m.role.as_str()
                )));
            }
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 over the system text and messages.
    ///
    /// The hashed bytes are `system_text`, `0x1f`, then for every message
    /// `role`, `0x1e`, `text`, `0x1f`, where `role` is `user` or `assistant`.
    /// Sampling settings are not part of the fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.system_text.as_bytes());
        hasher.update([0x1f]);
        for m in &self.messages {
            hasher.update(m.role.as_str().as_bytes());
            hasher.update([0x1e]);
            hasher.update(m.text.as_bytes());
            hasher.update([0x1f]);
        }
        hex::encode(hasher.finalize())
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;

    /// Upper bound on concurrent `complete` calls this provider accepts.
    fn max_in_flight(&self) -> usize {
        1
    }

    fn name(&self) -> &str;
}
