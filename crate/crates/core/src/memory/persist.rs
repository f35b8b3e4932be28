//! JSONL store files.
//!
//! Line 1 is a header object `{"schema":"episodic-memory/1","dimension":D,"k":K}`
//! optionally followed by `created_at` and `source`. Every further line is one
//! [`MemoryRecord`] with exactly the record's field names (`flags` may be
//! omitted). The neighbor graph is not stored: it is a pure function of the
//! records and `k` and is rebuilt on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::record::collect_violations;
use super::{IngestOptions, MemoryRecord, MemoryStore, StoreError, StoreMetadata};

pub const STORE_SCHEMA: &str = "episodic-memory/1";

const REQUIRED_FIELDS: &[&str] = &[
    "id",
    "scene_background",
    "narrator_intro",
    "first_person_narrative",
    "general_context",
    "expert_commentary",
    "characters",
    "emotions",
    "valence",
    "arousal",
    "timestamp",
    "granularity",
    "latitude",
    "longitude",
    "relevance_score",
    "embedding",
];
const OPTIONAL_FIELDS: &[&str] = &["flags"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: String,
    dimension: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

pub fn save_store(store: &MemoryStore, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_store(store, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_store(store: &MemoryStore, out: &mut impl Write) -> Result<(), StoreError> {
    let header = Header {
        schema: STORE_SCHEMA.into(),
        dimension: store.dimension(),
        k: store.k(),
        created_at: Some(store.metadata().created_at),
        source: Some(store.metadata().source.clone()),
    };
    serde_json::to_writer(&mut *out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for record in store.records() {
        serde_json::to_writer(&mut *out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_store(path: impl AsRef<Path>) -> Result<MemoryStore, StoreError> {
    read_store(BufReader::new(File::open(path)?))
}

fn violation(line: usize, field: &str, reason: impl Into<String>) -> StoreError {
    StoreError::SchemaViolation {
        line,
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_header(text: &str) -> Result<Header, StoreError> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| violation(1, "header", e.to_string()))?;
    if header.schema != STORE_SCHEMA {
        return Err(violation(
            1,
            "schema",
            format!("expected {STORE_SCHEMA:?}, found {:?}", header.schema),
        ));
    }
    if header.dimension == 0 {
        return Err(violation(1, "dimension", "must be positive"));
    }
    if header.k == 0 {
        return Err(violation(1, "k", "must be at least 1"));
    }
    Ok(header)
}

fn parse_record(text: &str, line: usize, dimension: usize) -> Result<MemoryRecord, StoreError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| violation(line, "<line>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| violation(line, "<line>", "expected a JSON object"))?;
    if let Some(field) = REQUIRED_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
        return Err(violation(line, field, "missing"));
    }
    if let Some(field) = obj
        .keys()
        .find(|k| !REQUIRED_FIELDS.contains(&k.as_str()) && !OPTIONAL_FIELDS.contains(&k.as_str()))
    {
        return Err(violation(line, field, "unknown field"));
    }
    let record: MemoryRecord = serde_path_to_error::deserialize(&value).map_err(|e| {
        let field = e.path().to_string();
        violation(line, &field, e.into_inner().to_string())
    })?;
    if record.embedding.len() != dimension {
        return Err(violation(
            line,
            "embedding",
            format!(
                "dimension {} does not match header {dimension}",
                record.embedding.len()
            ),
        ));
    }
    if let Some(v) = collect_violations(&record).into_iter().next() {
        return Err(violation(line, v.field(), v.to_string()));
    }
    Ok(record)
}

/// Reads a store from JSONL. Blank lines after the header are ignored; an
/// empty input is an empty-file error because the header fixes the dimension.
pub fn read_store(reader: impl BufRead) -> Result<MemoryStore, StoreError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => parse_header(&line?)?,
        None => return Err(violation(1, "header", "file is empty")),
    };
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record = parse_record(&text, line_no, header.dimension)?;
        if !seen.insert(record.id.clone()) {
            return Err(violation(
                line_no,
                "id",
                format!("duplicate id {:?}", record.id),
            ));
        }
        records.push(record);
    }
    let defaults = StoreMetadata::default();
    MemoryStore::ingest_with(
        records,
        IngestOptions {
            k: header.k,
            dimension: Some(header.dimension),
            metadata: StoreMetadata {
                created_at: header.created_at.unwrap_or(defaults.created_at),
                source: header.source.unwrap_or(defaults.source),
            },
        },
    )
}
