//! Versioned prompt templates.
//!
//! A template file has a `[system]` section and a `[user]` section. Both may
//! use `{{name}}` placeholders; rendering fails on a placeholder with no
//! value rather than sending it to the model verbatim.

use std::path::Path;

use crate::llm::ChatRequest;

pub const PROMPT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt `{template}` is malformed: {reason}")]
    Malformed { template: String, reason: String },
    #[error("prompt `{template}` uses placeholder `{name}` with no value")]
    UnfilledPlaceholder { template: String, name: String },
    #[error("cannot read prompt `{template}`: {reason}")]
    Unreadable { template: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    name: String,
    system: String,
    user: String,
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, PromptError> {
        let malformed = |reason: &str| PromptError::Malformed {
            template: name.to_string(),
            reason: reason.to_string(),
        };
        let body = text
            .trim_start()
            .strip_prefix("[system]")
            .ok_or_else(|| malformed("must start with a [system] section"))?;
        let (system, user) = body
            .split_once("\n[user]")
            .ok_or_else(|| malformed("missing [user] section"))?;
        Ok(Self {
            name: name.to_string(),
            system: system.trim().to_string(),
            user: user.trim().to_string(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Renders both sections into a single-turn request.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<ChatRequest, PromptError> {
        Ok(ChatRequest::single(
            fill(&self.name, &self.system, vars)?,
            fill(&self.name, &self.user, vars)?,
        ))
    }
}

/// Single pass over `text`, so values containing braces are never re-expanded.
fn fill(template: &str, text: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let name = after[..end].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::UnfilledPlaceholder {
                template: template.to_string(),
                name: name.to_string(),
            })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// The five templates the pipeline needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub script_writer: PromptTemplate,
    pub scene_analyst: PromptTemplate,
    pub emotion_rater: PromptTemplate,
    pub date_normalizer: PromptTemplate,
    pub location_normalizer: PromptTemplate,
}

const NAMES: [&str; 5] = [
    "script_writer",
    "scene_analyst",
    "emotion_rater",
    "date_normalizer",
    "location_normalizer",
];

impl PromptSet {
    /// Templates shipped with the crate.
    pub fn bundled() -> Self {
        let texts = [
            include_str!("../../prompts/script_writer.v1.txt"),
            include_str!("../../prompts/scene_analyst.v1.txt"),
            include_str!("../../prompts/emotion_rater.v1.txt"),
            include_str!("../../prompts/date_normalizer.v1.txt"),
            include_str!("../../prompts/location_normalizer.v1.txt"),
        ];
        Self::from_texts(texts).expect("bundled prompts are well formed")
    }

    /// Loads `<name>.v1.txt` for every template from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut texts = Vec::with_capacity(NAMES.len());
        for name in NAMES {
            let path = dir.join(format!("{name}.{PROMPT_VERSION}.txt"));
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Unreadable {
                template: name.to_string(),
                reason: format!("{}: {e}", path.display()),
            })?;
            texts.push(text);
        }
        let texts: [String; 5] = texts.try_into().expect("five templates");
        Self::from_texts(texts.each_ref().map(String::as_str))
    }

    fn from_texts(texts: [&str; 5]) -> Result<Self, PromptError> {
        let [a, b, c, d, e] = texts;
        Ok(Self {
            script_writer: PromptTemplate::parse(NAMES[0], a)?,
            scene_analyst: PromptTemplate::parse(NAMES[1], b)?,
            emotion_rater: PromptTemplate::parse(NAMES[2], c)?,
            date_normalizer: PromptTemplate::parse(NAMES[3], d)?,
            location_normalizer: PromptTemplate::parse(NAMES[4], e)?,
        })
    }
}
