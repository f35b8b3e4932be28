//! A small bundled Van Gogh-style corpus with scripted model replies, so the
//! whole system runs offline and deterministically.

use crate::augment::{
    ingest_raw, read_segments, run_pipeline, BiographySegment, PipelineConfig, PipelineOutput,
};
use crate::embedding::TrigramEmbedder;
use crate::llm::{ScriptedStub, StubScript};
use crate::memory::{IngestOptions, MemoryStore, StoreMetadata, DEFAULT_K};
use crate::persona::PersonaProfile;

pub const CORPUS_JSONL: &str = include_str!("../data/fixture/corpus.jsonl");
/// Queue-mode replies for augmenting [`CORPUS_JSONL`], in pipeline request order.
pub const STUB_SCRIPT_JSON: &str = include_str!("../data/fixture/stub_script.json");
pub const PROFILE_JSON: &str = include_str!("../data/fixture/profile.json");
pub const QUERIES_TXT: &str = include_str!("../data/fixture/queries.txt");

/// Source label recorded in fixture store metadata.
pub const FIXTURE_SOURCE: &str = "fixture";
/// Record built from the ear-incident segment.
pub const EAR_INCIDENT_ID: &str = "ear-incident-01";
pub const EAR_QUERY: &str = "Why did you cut your ear?";
/// Id under which tools expose [`augmented_store`].
pub const STORE_ID: &str = "fixture";
/// Id under which tools expose [`raw_store`].
pub const RAW_STORE_ID: &str = "fixture-raw";

pub fn segments() -> Vec<BiographySegment> {
    read_segments(CORPUS_JSONL.as_bytes()).expect("bundled corpus parses")
}

pub fn stub_script() -> StubScript {
    serde_json::from_str(STUB_SCRIPT_JSON).expect("bundled stub script parses")
}

/// A fresh stub holding the full augmentation script.
pub fn stub() -> ScriptedStub {
    ScriptedStub::from_script(stub_script())
}

pub fn profile() -> PersonaProfile {
    serde_json::from_str(PROFILE_JSON).expect("bundled profile parses")
}

pub fn queries() -> Vec<String> {
    crate::eval::parse_queries(QUERIES_TXT)
}

fn metadata() -> StoreMetadata {
    StoreMetadata {
        created_at: 0,
        source: FIXTURE_SOURCE.into(),
    }
}

/// Runs the pipeline over the bundled corpus with the bundled script.
pub fn augment() -> PipelineOutput {
    let config = PipelineConfig {
        metadata: metadata(),
        ..PipelineConfig::default()
    };
    run_pipeline(&segments(), &stub(), &TrigramEmbedder::new(), &config)
        .expect("bundled fixture augments cleanly")
}

pub fn augmented_store() -> MemoryStore {
    augment().store
}

/// The corpus segments embedded as-is, for traditional retrieval.
pub fn raw_store() -> MemoryStore {
    ingest_raw(
        &segments(),
        &TrigramEmbedder::new(),
        IngestOptions {
            k: DEFAULT_K,
            dimension: None,
            metadata: metadata(),
        },
    )
    .expect("bundled corpus embeds")
}
