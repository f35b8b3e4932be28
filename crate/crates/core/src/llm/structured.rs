//! Pulling schema-checked JSON out of free-form model replies.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ChatMessage, ChatProvider, ChatRequest, LlmError};

/// Re-asks after the first malformed reply before giving up.
pub const MAX_REASKS: usize = 2;

pub const REASK_INSTRUCTION: &str =
    "Return only valid JSON in the requested format, with no other text.";

/// A value that failed its schema, with the JSON path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub path: String,
    pub reason: String,
}

impl SchemaViolation {
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.reason)
        } else {
            write!(f, "{}: {}", self.path, self.reason)
        }
    }
}

impl std::error::Error for SchemaViolation {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object or array found in reply")]
    NoJsonFound,
    #[error("schema violation: {0}")]
    Schema(SchemaViolation),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructuredError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("no usable reply after {attempts} attempts: {last}")]
    Malformed { attempts: usize, last: ParseError },
}

/// A fixed record shape the pipeline expects from the model.
pub trait StructuredSchema: Sized {
    /// Validates `value`, bounds included, and converts it.
    fn from_json(value: &Value) -> Result<Self, SchemaViolation>;
}

/// Returns the first balanced `{...}` or `[...]` span in `text` that parses
/// as JSON. Brackets inside string literals are ignored, so surrounding
/// prose and code fences are tolerated.
pub fn extract_json(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = bytes[start..].iter().position(|&b| b == b'{' || b == b'[') {
        let open = start + offset;
        if let Some(close) = balanced_end(bytes, open) {
            if let Ok(v) = serde_json::from_str(&text[open..=close]) {
                return Some(v);
            }
        }
        start = open + 1;
    }
    None
}

/// Index of the bracket closing the one at `open`, if the nesting is sound.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut stack = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

pub fn parse_structured<T: StructuredSchema>(text: &str) -> Result<T, ParseError> {
    let value = extract_json(text).ok_or(ParseError::NoJsonFound)?;
    T::from_json(&value).map_err(ParseError::Schema)
}

/// Sends `request` and parses the reply as `T`, re-asking up to
/// [`MAX_REASKS`] times when the reply is malformed or fails `check`.
/// Each re-ask appends the bad reply and a correction request to the
/// conversation.
pub fn complete_structured<T: StructuredSchema>(
    llm: &dyn ChatProvider,
    request: &ChatRequest,
    check: impl Fn(&T) -> Result<(), SchemaViolation>,
) -> Result<T, StructuredError> {
    let mut request = request.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let reply = llm.complete(&request)?;
        let err = match parse_structured::<T>(&reply) {
            Ok(v) => match check(&v) {
                Ok(()) => return Ok(v),
                Err(violation) => ParseError::Schema(violation),
            },
            Err(e) => e,
        };
        if attempts > MAX_REASKS {
            return Err(StructuredError::Malformed {
                attempts,
                last: err,
            });
        }
        request.messages.push(ChatMessage::assistant(reply));
        request.messages.push(ChatMessage::user(format!(
            "{REASK_INSTRUCTION} Problem: {err}."
        )));
    }
}

/// Field access on a JSON object with path-qualified violations.
pub(crate) struct Fields<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
}

impl<'a> Fields<'a> {
    pub(crate) fn of(value: &'a Value, path: &str) -> Result<Self, SchemaViolation> {
        let map = value
            .as_object()
            .ok_or_else(|| SchemaViolation::new(path, "not an object"))?;
        Ok(Self {
            map,
            prefix: path.to_string(),
        })
    }

    pub(crate) fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    pub(crate) fn get(&self, key: &str) -> Result<&'a Value, SchemaViolation> {
        self.map
            .get(key)
            .ok_or_else(|| SchemaViolation::new(self.path(key), "missing"))
    }

    pub(crate) fn number_in(&self, key: &str, lo: f64, hi: f64) -> Result<f64, SchemaViolation> {
        let v = self
            .get(key)?
            .as_f64()
            .ok_or_else(|| SchemaViolation::new(self.path(key), "not a number"))?;
        if !(lo..=hi).contains(&v) {
            return Err(SchemaViolation::new(
                self.path(key),
                format!("{v} outside [{lo}, {hi}]"),
            ));
        }
        Ok(v)
    }

    pub(crate) fn string(&self, key: &str) -> Result<String, SchemaViolation> {
        self.get(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| SchemaViolation::new(self.path(key), "not a string"))
    }

    /// A string that may also be `null` or absent.
    pub(crate) fn optional_string(&self, key: &str) -> Result<Option<String>, SchemaViolation> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(SchemaViolation::new(self.path(key), "not a string or null")),
        }
    }

    pub(crate) fn string_list(&self, key: &str) -> Result<Vec<String>, SchemaViolation> {
        let items = self
            .get(key)?
            .as_array()
            .ok_or_else(|| SchemaViolation::new(self.path(key), "not a list"))?;
        items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str().map(str::to_string).ok_or_else(|| {
                    SchemaViolation::new(format!("{}[{i}]", self.path(key)), "not a string")
                })
            })
            .collect()
    }
}

/// A (valence, arousal) rating, both in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionPair {
    pub valence: f64,
    pub arousal: f64,
}

impl EmotionPair {
    pub(crate) fn from_fields(f: &Fields<'_>) -> Result<Self, SchemaViolation> {
        Ok(Self {
            valence: f.number_in("valence", -1.0, 1.0)?,
            arousal: f.number_in("arousal", -1.0, 1.0)?,
        })
    }
}

impl StructuredSchema for EmotionPair {
    fn from_json(value: &Value) -> Result<Self, SchemaViolation> {
        Self::from_fields(&Fields::of(value, "")?)
    }
}
