//! The episodic memory record and its validation rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::l2_norm;

/// Allowed deviation of a stored embedding's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// How precisely a record's timestamp is known.
///
/// Month and year timestamps point at 00:00:00 UTC of the first day of the
/// period. `Unknown` timestamps carry a placeholder value and are treated as
/// missing metadata during ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    Month,
    Year,
    Unknown,
}

impl Granularity {
    pub fn is_known(self) -> bool {
        self != Granularity::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionEntry {
    pub label: String,
    pub valence: f64,
    pub arousal: f64,
}

/// One augmented episodic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryRecord {
    pub id: String,
    pub scene_background: String,
    pub narrator_intro: String,
    pub first_person_narrative: String,
    pub general_context: String,
    pub expert_commentary: String,
    pub characters: Vec<String>,
    pub emotions: Vec<EmotionEntry>,
    pub valence: f64,
    pub arousal: f64,
    /// Seconds since the Unix epoch; negative for dates before 1970.
    pub timestamp: i64,
    pub granularity: Granularity,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub relevance_score: f64,
    pub embedding: Vec<f32>,
    /// Quality markers set during augmentation (e.g. `date_unknown`).
    #[serde(default)]
    pub flags: Vec<String>,
}

impl MemoryRecord {
    /// Latitude/longitude pair, when the scene has a known place.
    pub fn coordinates(&self) -> Option<(f64, f64)> {
        match (self.latitude, self.longitude) {
            (Some(lat), Some(lon)) => Some((lat, lon)),
            _ => None,
        }
    }

    /// Timestamp when its granularity is known.
    pub fn known_timestamp(&self) -> Option<i64> {
        self.granularity.is_known().then_some(self.timestamp)
    }

    pub fn affect(&self) -> (f64, f64) {
        (self.valence, self.arousal)
    }
}

/// A single broken invariant found by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BoundViolation { field: String, value: f64 },
    MissingField(String),
    BadEmbeddingNorm { norm: f64 },
}

impl Violation {
    pub fn field(&self) -> &str {
        match self {
            Violation::BoundViolation { field, .. } => field,
            Violation::MissingField(field) => field,
            Violation::BadEmbeddingNorm { .. } => "embedding",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BoundViolation { field, value } => {
                write!(f, "{field} out of bounds ({value})")
            }
            Violation::MissingField(field) => write!(f, "{field} is missing or empty"),
            Violation::BadEmbeddingNorm { norm } => {
                write!(f, "embedding L2 norm is {norm}, expected 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid record `{id}`: {}", display_list(.violations))]
pub struct ValidationError {
    pub id: String,
    pub violations: Vec<Violation>,
}

fn display_list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks every record invariant and returns the record unchanged if all
/// hold. The error lists each violation, not just the first.
pub fn validate_record(candidate: MemoryRecord) -> Result<MemoryRecord, ValidationError> {
    let violations = collect_violations(&candidate);
    if violations.is_empty() {
        Ok(candidate)
    } else {
        Err(ValidationError {
            id: candidate.id,
            violations,
        })
    }
}

fn check_range(out: &mut Vec<Violation>, field: &str, value: f64, lo: f64, hi: f64) {
    if !(value.is_finite() && value >= lo && value <= hi) {
        out.push(Violation::BoundViolation {
            field: field.to_string(),
            value,
        });
    }
}

pub(crate) fn collect_violations(record: &MemoryRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if record.id.trim().is_empty() {
        out.push(Violation::MissingField("id".into()));
    }
    if record.first_person_narrative.trim().is_empty() {
        out.push(Violation::MissingField("first_person_narrative".into()));
    }
    check_range(&mut out, "valence", record.valence, -1.0, 1.0);
    check_range(&mut out, "arousal", record.arousal, -1.0, 1.0);
    check_range(
        &mut out,
        "relevance_score",
        record.relevance_score,
        0.0,
        1.0,
    );
    for (i, emotion) in record.emotions.iter().enumerate() {
        if emotion.label.trim().is_empty() {
            out.push(Violation::MissingField(format!("emotions[{i}].label")));
        }
        check_range(
            &mut out,
            &format!("emotions[{i}].valence"),
            emotion.valence,
            -1.0,
            1.0,
        );
        check_range(
            &mut out,
            &format!("emotions[{i}].arousal"),
            emotion.arousal,
            -1.0,
            1.0,
        );
    }
    match (record.latitude, record.longitude) {
        (Some(lat), Some(lon)) => {
            check_range(&mut out, "latitude", lat, -90.0, 90.0);
            check_range(&mut out, "longitude", lon, -180.0, 180.0);
        }
        (Some(value), None) | (None, Some(value)) => out.push(Violation::BoundViolation {
            field: "coordinates".into(),
            value,
        }),
        (None, None) => {}
    }
    if record.embedding.is_empty() {
        out.push(Violation::MissingField("embedding".into()));
    } else {
        let norm = l2_norm(&record.embedding);
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            out.push(Violation::BadEmbeddingNorm { norm });
        }
    }
    out
}
