use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, LlmError};

/// On-disk form of a stub script. Either
/// `{"queue": ["first reply", "second reply"]}` or
/// `{"responses": {"<fingerprint>": "reply"}, "default": "fallback"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum StubScript {
    Queue {
        queue: Vec<String>,
    },
    Map {
        responses: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<String>,
    },
}

impl StubScript {
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

enum Mode {
    Queue(VecDeque<String>),
    Map {
        responses: BTreeMap<String, String>,
        default: Option<String>,
    },
}

/// Deterministic provider replaying canned texts.
///
/// Queue mode hands out replies in call order, so it admits one request at a
/// time. Map mode answers by request fingerprint and may be called
/// concurrently.
pub struct ScriptedStub {
    mode: Mutex<Mode>,
    concurrent: bool,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedStub {
    pub fn queue<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_mode(
            Mode::Queue(replies.into_iter().map(Into::into).collect()),
            false,
        )
    }

    pub fn map(responses: BTreeMap<String, String>, default: Option<String>) -> Self {
        Self::from_mode(Mode::Map { responses, default }, true)
    }

    /// Answers every request with the same text.
    pub fn constant(reply: impl Into<String>) -> Self {
        Self::map(BTreeMap::new(), Some(reply.into()))
    }

    pub fn from_script(script: StubScript) -> Self {
        match script {
            StubScript::Queue { queue } => Self::queue(queue),
            StubScript::Map { responses, default } => Self::map(responses, default),
        }
    }

    fn from_mode(mode: Mode, concurrent: bool) -> Self {
        Self {
            mode: Mutex::new(mode),
            concurrent,
            seen: Mutex::new(Vec::new()),
        }
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("stub lock").clone()
    }

    /// Replies still queued (always 0 in map mode).
    pub fn remaining(&self) -> usize {
        match &*self.mode.lock().expect("stub lock") {
            Mode::Queue(q) => q.len(),
            Mode::Map { .. } => 0,
        }
    }
}

impl ChatProvider for ScriptedStub {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        self.seen.lock().expect("stub lock").push(request.clone());
        match &mut *self.mode.lock().expect("stub lock") {
            Mode::Queue(q) => q.pop_front().ok_or(LlmError::StubExhausted),
            Mode::Map { responses, default } => {
                let fingerprint = request.fingerprint();
                responses
                    .get(&fingerprint)
                    .or(default.as_ref())
                    .cloned()
                    .ok_or(LlmError::NoStubResponse { fingerprint })
            }
        }
    }

    fn max_in_flight(&self) -> usize {
        if self.concurrent {
            16
        } else {
            1
        }
    }

    fn name(&self) -> &str {
        "scripted-stub"
    }
}
