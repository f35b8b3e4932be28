//! Turning biography text into episodic memory records.
//!
//! The pipeline runs five model-backed stages in order: the script writer
//! rewrites each segment as first-person scenes, the scene analyst extracts
//! characters, emotions, place, date and commentary, the emotion rater
//! scores every distinct emotion label, and two normalizers turn free-text
//! dates and places into ISO dates and gazetteer names. Each stage finishes
//! for every scene before the next begins, and results are joined in scene
//! order, so a queue-mode stub sees a fixed request sequence.

mod calendar;
mod gazetteer;
mod prompts;
mod schemas;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calendar::{corpus_midpoint, iso_to_timestamp};
pub use gazetteer::{Gazetteer, GazetteerError};
pub use prompts::{PromptError, PromptSet, PromptTemplate, PROMPT_VERSION};
pub use schemas::{
    EmotionRatings, NormalizedDate, NormalizedLocation, SceneAnalysis, SceneBatch, SceneDraft,
};

use crate::embedding::Embedder;
use crate::limit::map_bounded;
use crate::llm::{
    complete_structured, ChatProvider, EmotionPair, LlmError, SchemaViolation, StructuredError,
};
use crate::memory::{
    validate_record, EmotionEntry, Granularity, IngestOptions, MemoryRecord, MemoryStore,
    StoreError, StoreMetadata, DEFAULT_K,
};

pub const STAGE_PIPELINE: &str = "pipeline";
pub const STAGE_SCRIPT_WRITER: &str = "script_writer";
pub const STAGE_SCENE_ANALYST: &str = "scene_analyst";
pub const STAGE_EMOTION_RATER: &str = "emotion_rater";
pub const STAGE_DATE_NORMALIZER: &str = "date_normalizer";
pub const STAGE_LOCATION_NORMALIZER: &str = "location_normalizer";
pub const STAGE_EMBEDDER: &str = "embedder";

/// Scene had no emotion labels; its affect is the neutral (0, 0).
pub const FLAG_NO_EMOTIONS: &str = "no_emotions";
/// Date could not be normalized; the timestamp is the corpus midpoint.
pub const FLAG_DATE_UNKNOWN: &str = "date_unknown";
/// Place could not be resolved to coordinates.
pub const FLAG_LOCATION_UNKNOWN: &str = "location_unknown";
/// Record built straight from a biography segment, without augmentation.
pub const FLAG_RAW: &str = "raw";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiographySegment {
    pub id: String,
    pub source_text: String,
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub background: String,
    pub narrator_intro: String,
    pub first_person_voiceover: String,
    pub source_segment_ids: Vec<String>,
}

/// What went wrong with one segment or scene, and in which stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub unit: String,
    pub stage: String,
    pub error: String,
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed in {}: {}", self.unit, self.stage, self.error)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("the corpus has no segments")]
    EmptyCorpus,
    #[error("segment line {line}: {reason}")]
    InvalidSegment { line: usize, reason: String },
    #[error("{0}")]
    Stage(StageFailure),
    #[error("emotion lexicon failed for labels [{}]: {reason}", labels.join(", "))]
    Lexicon { labels: Vec<String>, reason: String },
    #[error("emotion label `{0}` is not in the lexicon")]
    UnknownLabel(String),
    #[error("{failed} of {total} units failed, above the {threshold} threshold; first: {}", failures.first().map(ToString::to_string).unwrap_or_default())]
    TooManyFailures {
        failed: usize,
        total: usize,
        threshold: f64,
        failures: Vec<StageFailure>,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads a JSONL corpus, one [`BiographySegment`] per line. Blank lines are
/// skipped. Segments come back ordered by `ordinal`.
pub fn read_segments(reader: impl BufRead) -> Result<Vec<BiographySegment>, AugmentError> {
    let mut segments: Vec<BiographySegment> = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let invalid = |reason: String| AugmentError::InvalidSegment {
            line: line_no,
            reason,
        };
        let segment: BiographySegment =
            serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if segment.id.trim().is_empty() {
            return Err(invalid("id is empty".into()));
        }
        if segment.source_text.trim().is_empty() {
            return Err(invalid("source_text is empty".into()));
        }
        if !ids.insert(segment.id.clone()) {
            return Err(invalid(format!("duplicate id {:?}", segment.id)));
        }
        segments.push(segment);
    }
    segments.sort_by_key(|s| s.ordinal);
    Ok(segments)
}

pub fn load_segments(path: impl AsRef<Path>) -> Result<Vec<BiographySegment>, AugmentError> {
    read_segments(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Emotion label → (valence, arousal). Labels are lowercased and trimmed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmotionLexicon(BTreeMap<String, EmotionPair>);

impl EmotionLexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, EmotionPair)>) -> Self {
        Self(
            entries
                .into_iter()
                .map(|(k, v)| (normalize_label(&k), v))
                .collect(),
        )
    }

    pub fn get(&self, label: &str) -> Option<EmotionPair> {
        self.0.get(&normalize_label(label)).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EmotionPair)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub fn normalize_label(label: &str) -> String {
    label.trim().to_lowercase()
}

/// Normalized labels of a scene in first-seen order, duplicates removed.
fn scene_labels(analysis: &SceneAnalysis) -> Vec<String> {
    let mut seen = BTreeSet::new();
    analysis
        .dominant_emotions
        .iter()
        .map(|l| normalize_label(l))
        .filter(|l| seen.insert(l.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneAffect {
    pub valence: f64,
    pub arousal: f64,
    /// The scene had no emotions, so the affect is the neutral default.
    pub low_confidence: bool,
}

/// Mean valence and arousal of the scene's distinct emotion labels.
pub fn scene_affect(
    analysis: &SceneAnalysis,
    lexicon: &EmotionLexicon,
) -> Result<SceneAffect, AugmentError> {
    let labels = scene_labels(analysis);
    if labels.is_empty() {
        return Ok(SceneAffect {
            valence: 0.0,
            arousal: 0.0,
            low_confidence: true,
        });
    }
    let mut sum = (0.0, 0.0);
    for label in &labels {
        let p = lexicon
            .get(label)
            .ok_or_else(|| AugmentError::UnknownLabel(label.clone()))?;
        sum.0 += p.valence;
        sum.1 += p.arousal;
    }
    let n = labels.len() as f64;
    Ok(SceneAffect {
        valence: sum.0 / n,
        arousal: sum.1 / n,
        low_confidence: false,
    })
}

/// Result of normalizing a place description.
#[derive(Debug, Clone, PartialEq)]
pub enum LocationOutcome {
    /// No place was given.
    Absent,
    Resolved {
        place: String,
        lat: f64,
        lon: f64,
    },
    /// A place was given but could not be placed on the map.
    Unknown {
        place: Option<String>,
    },
}

/// The model-backed stages, bound to one provider, prompt set and persona.
pub struct Stages<'a> {
    pub llm: &'a dyn ChatProvider,
    pub prompts: &'a PromptSet,
    pub persona: &'a str,
}

fn failure(unit: &str, stage: &str, error: impl ToString) -> StageFailure {
    StageFailure {
        unit: unit.to_string(),
        stage: stage.to_string(),
        error: error.to_string(),
    }
}

impl Stages<'_> {
    /// Rewrites one segment as scenes with ids `<segment id>-01`, `-02`, ...
    pub fn scenes_for(&self, segment: &BiographySegment) -> Result<Vec<Scene>, StageFailure> {
        let request = self
            .prompts
            .script_writer
            .render(&[
                ("persona", self.persona),
                ("segment_id", &segment.id),
                ("source_text", &segment.source_text),
            ])
            .map_err(|e| failure(&segment.id, STAGE_SCRIPT_WRITER, e))?;
        let SceneBatch(drafts) = complete_structured(self.llm, &request, |_| Ok(()))
            .map_err(|e| failure(&segment.id, STAGE_SCRIPT_WRITER, e))?;
        Ok(drafts
            .into_iter()
            .enumerate()
            .map(|(i, d)| Scene {
                id: format!("{}-{:02}", segment.id, i + 1),
                background: d.background,
                narrator_intro: d.narrator_intro,
                first_person_voiceover: d.first_person_voiceover,
                source_segment_ids: vec![segment.id.clone()],
            })
            .collect())
    }

    /// Scenes for every segment, in segment order. Stops at the first failure.
    pub fn generate_scenes(
        &self,
        segments: &[BiographySegment],
    ) -> Result<Vec<Scene>, AugmentError> {
        if segments.is_empty() {
            return Err(AugmentError::EmptyCorpus);
        }
        let mut scenes = Vec::new();
        for segment in segments {
            scenes.extend(self.scenes_for(segment).map_err(AugmentError::Stage)?);
        }
        Ok(scenes)
    }

    pub fn analyze_scene(&self, scene: &Scene) -> Result<SceneAnalysis, StageFailure> {
        let request = self
            .prompts
            .scene_analyst
            .render(&[
                ("persona", self.persona),
                ("scene_id", &scene.id),
                ("background", &scene.background),
                ("narrator_intro", &scene.narrator_intro),
                ("first_person_voiceover", &scene.first_person_voiceover),
            ])
            .map_err(|e| failure(&scene.id, STAGE_SCENE_ANALYST, e))?;
        complete_structured(self.llm, &request, |_| Ok(()))
            .map_err(|e| failure(&scene.id, STAGE_SCENE_ANALYST, e))
    }

    /// Rates every label, `batch_size` labels per request. Labels are
    /// normalized and deduplicated first; a reply that leaves any label of
    /// its batch unrated is re-asked like a malformed one.
    pub fn build_emotion_lexicon<'l>(
        &self,
        labels: impl IntoIterator<Item = &'l str>,
        batch_size: usize,
    ) -> Result<EmotionLexicon, AugmentError> {
        let labels: Vec<String> = labels
            .into_iter()
            .map(normalize_label)
            .filter(|l| !l.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let batches: Vec<&[String]> = labels.chunks(batch_size.max(1)).collect();
        let results = map_bounded(&batches, self.llm.max_in_flight(), |batch| {
            self.rate_batch(batch)
        });
        let mut lexicon = BTreeMap::new();
        for ratings in results {
            lexicon.extend(ratings?);
        }
        Ok(EmotionLexicon(lexicon))
    }

    fn rate_batch(&self, batch: &[String]) -> Result<BTreeMap<String, EmotionPair>, AugmentError> {
        let lexicon_error = |reason: String| AugmentError::Lexicon {
            labels: batch.to_vec(),
            reason,
        };
        let request = self
            .prompts
            .emotion_rater
            .render(&[("labels", &batch.join("\n"))])?;
        let EmotionRatings(mut ratings) =
            complete_structured(self.llm, &request, |r: &EmotionRatings| {
                let missing: Vec<&str> = batch
                    .iter()
                    .filter(|l| !r.0.contains_key(*l))
                    .map(String::as_str)
                    .collect();
                if missing.is_empty() {
                    Ok(())
                } else {
                    Err(SchemaViolation::new(
                        "",
                        format!("missing labels: {}", missing.join(", ")),
                    ))
                }
            })
            .map_err(|e| lexicon_error(e.to_string()))?;
        ratings.retain(|k, _| batch.contains(k));
        Ok(ratings)
    }

    /// `Ok(None)` when the text names no calendar date, including when the
    /// model cannot produce a valid ISO date within its re-asks.
    pub fn standardize_date(
        &self,
        date_text: &str,
    ) -> Result<Option<(i64, Granularity)>, LlmError> {
        if date_text.trim().is_empty() {
            return Ok(None);
        }
        let request = self
            .prompts
            .date_normalizer
            .render(&[("date_text", date_text)])
            .map_err(|e| LlmError::InvalidRequest(e.to_string()))?;
        let reply = complete_structured(self.llm, &request, |d: &NormalizedDate| match &d.0 {
            Some(iso) if iso_to_timestamp(iso).is_none() => Err(SchemaViolation::new(
                "iso",
                format!("{iso:?} is not YYYY, YYYY-MM or YYYY-MM-DD"),
            )),
            _ => Ok(()),
        });
        match reply {
            Ok(NormalizedDate(iso)) => Ok(iso.as_deref().and_then(iso_to_timestamp)),
            Err(StructuredError::Malformed { .. }) => Ok(None),
            Err(StructuredError::Llm(e)) => Err(e),
        }
    }

    pub fn standardize_location(
        &self,
        location_text: &str,
        gazetteer: &Gazetteer,
    ) -> Result<LocationOutcome, LlmError> {
        if location_text.trim().is_empty() {
            return Ok(LocationOutcome::Absent);
        }
        let request = self
            .prompts
            .location_normalizer
            .render(&[("location_text", location_text)])
            .map_err(|e| LlmError::InvalidRequest(e.to_string()))?;
        let place = match complete_structured::<NormalizedLocation>(self.llm, &request, |_| Ok(()))
        {
            Ok(NormalizedLocation(place)) => place,
            Err(StructuredError::Malformed { .. }) => None,
            Err(StructuredError::Llm(e)) => return Err(e),
        };
        Ok(match place.as_deref().map(|p| (p, gazetteer.lookup(p))) {
            Some((p, Some((lat, lon)))) => LocationOutcome::Resolved {
                place: p.to_string(),
                lat,
                lon,
            },
            _ => LocationOutcome::Unknown { place },
        })
    }
}

/// Record fields that make up the text each record is embedded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedField {
    SceneBackground,
    NarratorIntro,
    FirstPersonNarrative,
    GeneralContext,
    ExpertCommentary,
}

impl EmbedField {
    fn of(self, r: &MemoryRecord) -> &str {
        match self {
            EmbedField::SceneBackground => &r.scene_background,
            EmbedField::NarratorIntro => &r.narrator_intro,
            EmbedField::FirstPersonNarrative => &r.first_person_narrative,
            EmbedField::GeneralContext => &r.general_context,
            EmbedField::ExpertCommentary => &r.expert_commentary,
        }
    }
}

/// The chosen fields, non-empty ones only, separated by a blank line.
pub fn embedding_text(record: &MemoryRecord, fields: &[EmbedField]) -> String {
    fields
        .iter()
        .map(|f| f.of(record).trim())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub persona_name: String,
    pub k: usize,
    pub embed_fields: Vec<EmbedField>,
    /// The run fails when the failed fraction of units exceeds this.
    pub failure_threshold: f64,
    pub lexicon_batch_size: usize,
    pub prompts: PromptSet,
    pub gazetteer: Gazetteer,
    pub metadata: StoreMetadata,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            persona_name: "Vincent van Gogh".into(),
            k: DEFAULT_K,
            embed_fields: vec![EmbedField::FirstPersonNarrative, EmbedField::GeneralContext],
            failure_threshold: 0.10,
            lexicon_batch_size: 40,
            prompts: PromptSet::bundled(),
            gazetteer: Gazetteer::bundled(),
            metadata: StoreMetadata::default(),
        }
    }
}

/// Which stage produced each field of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub record_id: String,
    pub source_segment_ids: Vec<String>,
    pub fields: BTreeMap<String, String>,
}

fn provenance_for(scene: &Scene) -> ProvenanceEntry {
    let fields = [
        ("id", STAGE_PIPELINE),
        ("scene_background", STAGE_SCRIPT_WRITER),
        ("narrator_intro", STAGE_SCRIPT_WRITER),
        ("first_person_narrative", STAGE_SCRIPT_WRITER),
        ("general_context", STAGE_SCENE_ANALYST),
        ("expert_commentary", STAGE_SCENE_ANALYST),
        ("characters", STAGE_SCENE_ANALYST),
        ("relevance_score", STAGE_SCENE_ANALYST),
        ("emotions", STAGE_EMOTION_RATER),
        ("valence", STAGE_EMOTION_RATER),
        ("arousal", STAGE_EMOTION_RATER),
        ("timestamp", STAGE_DATE_NORMALIZER),
        ("granularity", STAGE_DATE_NORMALIZER),
        ("latitude", STAGE_LOCATION_NORMALIZER),
        ("longitude", STAGE_LOCATION_NORMALIZER),
        ("embedding", STAGE_EMBEDDER),
        ("flags", STAGE_PIPELINE),
    ];
    ProvenanceEntry {
        record_id: scene.id.clone(),
        source_segment_ids: scene.source_segment_ids.clone(),
        fields: fields
            .iter()
            .map(|(f, s)| (f.to_string(), s.to_string()))
            .collect(),
    }
}

pub fn write_provenance(entries: &[ProvenanceEntry], out: &mut impl Write) -> std::io::Result<()> {
    for entry in entries {
        serde_json::to_writer(&mut *out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub store: MemoryStore,
    /// One entry per stored record, in record id order.
    pub provenance: Vec<ProvenanceEntry>,
    /// Segments and scenes that were dropped, in processing order.
    pub failures: Vec<StageFailure>,
}

/// A scene that has survived every stage so far.
struct Draft {
    scene: Scene,
    analysis: SceneAnalysis,
}

/// Runs every stage and ingests the surviving records. Failed segments and
/// scenes are dropped and reported; the run fails only when their share
/// of all units exceeds `config.failure_threshold` or when the emotion
/// lexicon cannot be built.
pub fn run_pipeline(
    segments: &[BiographySegment],
    llm: &dyn ChatProvider,
    embedder: &dyn Embedder,
    config: &PipelineConfig,
) -> Result<PipelineOutput, AugmentError> {
    if segments.is_empty() {
        return Err(AugmentError::EmptyCorpus);
    }
    let stages = Stages {
        llm,
        prompts: &config.prompts,
        persona: &config.persona_name,
    };
    let bound = llm.max_in_flight();
    let mut failures = Vec::new();

    let mut scenes = Vec::new();
    for result in map_bounded(segments, bound, |s| stages.scenes_for(s)) {
        match result {
            Ok(batch) => scenes.extend(batch),
            Err(f) => failures.push(f),
        }
    }
    let total = scenes.len() + failures.len();

    let mut drafts = Vec::new();
    for (scene, result) in scenes
        .iter()
        .zip(map_bounded(&scenes, bound, |s| stages.analyze_scene(s)))
    {
        match result {
            Ok(analysis) => drafts.push(Draft {
                scene: scene.clone(),
                analysis,
            }),
            Err(f) => failures.push(f),
        }
    }

    let labels: BTreeSet<String> = drafts
        .iter()
        .flat_map(|d| scene_labels(&d.analysis))
        .collect();
    let lexicon = stages
        .build_emotion_lexicon(labels.iter().map(String::as_str), config.lexicon_batch_size)?;

    let dates = map_bounded(&drafts, bound, |d| {
        stages.standardize_date(&d.analysis.date_text)
    });
    let places = map_bounded(&drafts, bound, |d| {
        stages.standardize_location(&d.analysis.location_text, &config.gazetteer)
    });
    let known: Vec<i64> = dates
        .iter()
        .filter_map(|d| d.as_ref().ok().copied().flatten().map(|(t, _)| t))
        .collect();
    let midpoint = corpus_midpoint(&known);

    let mut unembedded = Vec::new();
    for ((draft, date), place) in drafts.into_iter().zip(dates).zip(places) {
        let id = draft.scene.id.clone();
        let date = match date {
            Ok(d) => d,
            Err(e) => {
                failures.push(failure(&id, STAGE_DATE_NORMALIZER, e));
                continue;
            }
        };
        let place = match place {
            Ok(p) => p,
            Err(e) => {
                failures.push(failure(&id, STAGE_LOCATION_NORMALIZER, e));
                continue;
            }
        };
        match assemble(draft, &lexicon, date, place, midpoint) {
            Ok(pair) => unembedded.push(pair),
            Err(f) => failures.push(f),
        }
    }

    let texts: Vec<String> = unembedded
        .iter()
        .map(|(r, _)| embedding_text(r, &config.embed_fields))
        .collect();
    let vectors = map_bounded(&texts, embedder.max_in_flight(), |t| embedder.embed(t));
    let mut records = Vec::new();
    let mut provenance = Vec::new();
    for ((mut record, scene), vector) in unembedded.into_iter().zip(vectors) {
        let vector = match vector {
            Ok(v) => v,
            Err(e) => {
                failures.push(failure(&record.id, STAGE_EMBEDDER, e));
                continue;
            }
        };
        record.embedding = vector.into_vec();
        match validate_record(record) {
            Ok(r) => {
                provenance.push(provenance_for(&scene));
                records.push(r);
            }
            Err(e) => failures.push(failure(&scene.id, STAGE_PIPELINE, e)),
        }
    }

    let failed = failures.len();
    if failed as f64 > config.failure_threshold * total as f64 {
        return Err(AugmentError::TooManyFailures {
            failed,
            total,
            threshold: config.failure_threshold,
            failures,
        });
    }
    provenance.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let store = MemoryStore::ingest_with(
        records,
        IngestOptions {
            k: config.k,
            dimension: Some(embedder.dimension()),
            metadata: config.metadata.clone(),
        },
    )?;
    Ok(PipelineOutput {
        store,
        provenance,
        failures,
    })
}

fn assemble(
    draft: Draft,
    lexicon: &EmotionLexicon,
    date: Option<(i64, Granularity)>,
    place: LocationOutcome,
    midpoint: i64,
) -> Result<(MemoryRecord, Scene), StageFailure> {
    let Draft { scene, analysis } = draft;
    let mut flags = Vec::new();
    let affect =
        scene_affect(&analysis, lexicon).map_err(|e| failure(&scene.id, STAGE_EMOTION_RATER, e))?;
    if affect.low_confidence {
        flags.push(FLAG_NO_EMOTIONS.to_string());
    }
    let emotions = scene_labels(&analysis)
        .into_iter()
        .map(|label| {
            let p = lexicon.get(&label).expect("checked by scene_affect");
            EmotionEntry {
                label,
                valence: p.valence,
                arousal: p.arousal,
            }
        })
        .collect();
    let (timestamp, granularity) = date.unwrap_or_else(|| {
        flags.push(FLAG_DATE_UNKNOWN.to_string());
        (midpoint, Granularity::Unknown)
    });
    let (latitude, longitude) = match place {
        LocationOutcome::Resolved { lat, lon, .. } => (Some(lat), Some(lon)),
        LocationOutcome::Absent => (None, None),
        LocationOutcome::Unknown { .. } => {
            flags.push(FLAG_LOCATION_UNKNOWN.to_string());
            (None, None)
        }
    };
    let record = MemoryRecord {
        id: scene.id.clone(),
        scene_background: scene.background.clone(),
        narrator_intro: scene.narrator_intro.clone(),
        first_person_narrative: scene.first_person_voiceover.clone(),
        general_context: analysis.context_summary,
        expert_commentary: analysis.commentary,
        characters: analysis.characters,
        emotions,
        valence: affect.valence,
        arousal: affect.arousal,
        timestamp,
        granularity,
        latitude,
        longitude,
        relevance_score: analysis.relevance_score,
        embedding: Vec::new(),
        flags,
    };
    Ok((record, scene))
}

/// Relevance given to raw records, which have no expert score.
pub const RAW_RELEVANCE: f64 = 0.5;

/// Builds a store straight from the segments: each record's narrative is the
/// segment text, embedded as is, with neutral affect and no date or place.
pub fn ingest_raw(
    segments: &[BiographySegment],
    embedder: &dyn Embedder,
    options: IngestOptions,
) -> Result<MemoryStore, AugmentError> {
    if segments.is_empty() {
        return Err(AugmentError::EmptyCorpus);
    }
    let vectors = map_bounded(segments, embedder.max_in_flight(), |s| {
        embedder.embed(&s.source_text)
    });
    let mut records = Vec::with_capacity(segments.len());
    for (segment, vector) in segments.iter().zip(vectors) {
        let vector =
            vector.map_err(|e| AugmentError::Stage(failure(&segment.id, STAGE_EMBEDDER, e)))?;
        records.push(MemoryRecord {
            id: segment.id.clone(),
            scene_background: String::new(),
            narrator_intro: String::new(),
            first_person_narrative: segment.source_text.clone(),
            general_context: String::new(),
            expert_commentary: String::new(),
            characters: Vec::new(),
            emotions: Vec::new(),
            valence: 0.0,
            arousal: 0.0,
            timestamp: 0,
            granularity: Granularity::Unknown,
            latitude: None,
            longitude: None,
            relevance_score: RAW_RELEVANCE,
            embedding: vector.into_vec(),
            flags: vec![FLAG_RAW.to_string()],
        });
    }
    let options = IngestOptions {
        dimension: Some(embedder.dimension()),
        ..options
    };
    Ok(MemoryStore::ingest_with(records, options)?)
}
