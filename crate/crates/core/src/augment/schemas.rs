//! Reply shapes for each pipeline stage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::llm::structured::Fields;
use crate::llm::{EmotionPair, SchemaViolation, StructuredSchema};

/// One scene as the script writer returns it, before it gets an id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDraft {
    pub background: String,
    pub narrator_intro: String,
    pub first_person_voiceover: String,
}

/// The script writer's reply: a single scene object, a bare array of scenes,
/// or `{"scenes": [...]}`. At least one scene is required.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBatch(pub Vec<SceneDraft>);

fn scene_draft(value: &Value, path: &str) -> Result<SceneDraft, SchemaViolation> {
    let f = Fields::of(value, path)?;
    let voiceover = f.string("first_person_voiceover")?;
    if voiceover.trim().is_empty() {
        return Err(SchemaViolation::new(
            f.path("first_person_voiceover"),
            "empty",
        ));
    }
    Ok(SceneDraft {
        background: f.string("background")?,
        narrator_intro: f.string("narrator_intro")?,
        first_person_voiceover: voiceover,
    })
}

impl StructuredSchema for SceneBatch {
    fn from_json(value: &Value) -> Result<Self, SchemaViolation> {
        let (items, prefix): (&[Value], &str) = match value {
            Value::Array(items) => (items, ""),
            Value::Object(map) if map.contains_key("scenes") => match &map["scenes"] {
                Value::Array(items) => (items, "scenes"),
                _ => return Err(SchemaViolation::new("scenes", "not a list")),
            },
            Value::Object(_) => return Ok(Self(vec![scene_draft(value, "")?])),
            _ => {
                return Err(SchemaViolation::new(
                    "",
                    "expected a scene object or a list of scenes",
                ))
            }
        };
        if items.is_empty() {
            return Err(SchemaViolation::new(prefix, "no scenes"));
        }
        items
            .iter()
            .enumerate()
            .map(|(i, v)| scene_draft(v, &format!("{prefix}[{i}]")))
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnalysis {
    pub characters: Vec<String>,
    pub dominant_emotions: Vec<String>,
    pub location_text: String,
    pub date_text: String,
    pub context_summary: String,
    pub relevance_score: f64,
    pub commentary: String,
}

impl StructuredSchema for SceneAnalysis {
    fn from_json(value: &Value) -> Result<Self, SchemaViolation> {
        let f = Fields::of(value, "")?;
        let dominant_emotions = f.string_list("dominant_emotions")?;
        if let Some(i) = dominant_emotions.iter().position(|e| e.trim().is_empty()) {
            return Err(SchemaViolation::new(
                format!("dominant_emotions[{i}]"),
                "empty label",
            ));
        }
        Ok(Self {
            characters: f.string_list("characters")?,
            dominant_emotions,
            location_text: f.optional_string("location_text")?.unwrap_or_default(),
            date_text: f.optional_string("date_text")?.unwrap_or_default(),
            context_summary: f.string("context_summary")?,
            relevance_score: f.number_in("relevance_score", 0.0, 1.0)?,
            commentary: f.string("commentary")?,
        })
    }
}

/// Label → rating, with labels lowercased and trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionRatings(pub BTreeMap<String, EmotionPair>);

impl StructuredSchema for EmotionRatings {
    fn from_json(value: &Value) -> Result<Self, SchemaViolation> {
        let map = value
            .as_object()
            .ok_or_else(|| SchemaViolation::new("", "not an object"))?;
        let mut out = BTreeMap::new();
        for (label, rating) in map {
            let pair = EmotionPair::from_fields(&Fields::of(rating, label)?)?;
            out.insert(label.trim().to_lowercase(), pair);
        }
        Ok(Self(out))
    }
}

/// `{"iso": "YYYY[-MM[-DD]]"}` or `{"iso": null}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDate(pub Option<String>);

impl StructuredSchema for NormalizedDate {
    fn from_json(value: &Value) -> Result<Self, SchemaViolation> {
        let f = Fields::of(value, "")?;
        f.get("iso")?;
        Ok(Self(f.optional_string("iso")?))
    }
}

/// `{"place": "City, Country"}` or `{"place": null}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLocation(pub Option<String>);

impl StructuredSchema for NormalizedLocation {
    fn from_json(value: &Value) -> Result<Self, SchemaViolation> {
        let f = Fields::of(value, "")?;
        f.get("place")?;
        Ok(Self(f.optional_string("place")?))
    }
}
