use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, LlmError};

/// Environment variable holding the chat API key.
pub const LLM_API_KEY_ENV: &str = "EPISODIC_LLM_API_KEY";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Client for an OpenAI-compatible chat endpoint.
///
/// request  `{"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}`
///          with the system text sent as a leading `system` message
/// response `{"choices": [{"message": {"content": "..."}}]}`
pub struct RemoteChatProvider {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    max_in_flight: usize,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    content: String,
}

impl RemoteChatProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(LLM_API_KEY_ENV).ok(),
            timeout,
            max_in_flight: 4,
            client,
        })
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    fn transport_error(&self, e: reqwest::Error) -> LlmError {
        if e.is_timeout() {
            LlmError::Timeout {
                seconds: self.timeout.as_secs(),
            }
        } else {
            LlmError::ProviderUnavailable(e.to_string())
        }
    }
}

impl ChatProvider for RemoteChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        let mut messages = vec![WireMessage {
            role: "system",
            content: &request.system_text,
        }];
        messages.extend(request.messages.iter().map(|m| WireMessage {
            role: m.role.as_str(),
            content: &m.text,
        }));
        let mut req = self.client.post(&self.endpoint).json(&WireRequest {
            model: &self.model,
            messages,
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| self.transport_error(e))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::ProviderUnavailable(format!("status {status}")));
        }
        let body: WireResponse = resp.json().map_err(|e| {
            if e.is_timeout() {
                self.transport_error(e)
            } else {
                LlmError::BadResponse(e.to_string())
            }
        })?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::BadResponse("empty choices array".into()))
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    fn name(&self) -> &str {
        &self.model
    }
}
