//! Episodic memory records, the immutable store, and its neighbor graph.
//!
//! A [`MemoryStore`] is built once by [`MemoryStore::ingest`] and never
//! mutated afterwards, so it can be shared freely between readers. Records
//! are kept sorted by id; every tie-break in the crate relies on that order.

mod graph;
mod partition;
mod persist;
mod record;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::embedding::dot_f32;

pub use persist::{load_store, read_store, save_store, write_store, STORE_SCHEMA};
pub use record::{
    validate_record, EmotionEntry, Granularity, MemoryRecord, ValidationError, Violation,
    NORM_TOLERANCE,
};

pub(crate) use graph::{by_score_then_index, Rows};

/// Default out-degree of the neighbor graph.
pub const DEFAULT_K: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("record `{id}` has dimension {found}, store expects {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("neighbor count k must be at least 1")]
    InvalidK,
    #[error("embedding dimension must be positive and known")]
    UnknownDimension,
    #[error(transparent)]
    InvalidRecord(#[from] ValidationError),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("schema violation at line {line}, field `{field}`: {reason}")]
    SchemaViolation {
        line: usize,
        field: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMetadata {
    /// Unix seconds.
    pub created_at: i64,
    pub source: String,
}

impl Default for StoreMetadata {
    fn default() -> Self {
        Self {
            created_at: 0,
            source: "unnamed".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub k: usize,
    /// Required when the record list may be empty.
    pub dimension: Option<usize>,
    pub metadata: StoreMetadata,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            dimension: None,
            metadata: StoreMetadata::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    records: Vec<MemoryRecord>,
    index: HashMap<String, usize>,
    /// Contiguous copy of every embedding, row `i` belongs to `records[i]`.
    vectors: Vec<f32>,
    neighbors: Vec<Vec<u32>>,
    /// Pivot partitions from the graph build; empty for small stores.
    partitions: Vec<partition::Partition>,
    dimension: usize,
    k: usize,
    metadata: StoreMetadata,
}

impl MemoryStore {
    /// Builds a store with default metadata and the given out-degree.
    pub fn ingest(records: Vec<MemoryRecord>, k: usize) -> Result<Self, StoreError> {
        Self::ingest_with(
            records,
            IngestOptions {
                k,
                ..IngestOptions::default()
            },
        )
    }

    /// Validates records, sorts them by id, and builds the exact k-NN graph.
    /// The result does not depend on input order.
    pub fn ingest_with(
        mut records: Vec<MemoryRecord>,
        options: IngestOptions,
    ) -> Result<Self, StoreError> {
        Self::check_and_sort(&mut records, &options)?;
        Self::assemble(records, options, graph::Strategy::Auto)
    }

    fn check_and_sort(
        records: &mut [MemoryRecord],
        options: &IngestOptions,
    ) -> Result<(), StoreError> {
        if options.k == 0 {
            return Err(StoreError::InvalidK);
        }
        let dimension = options
            .dimension
            .or_else(|| records.first().map(|r| r.embedding.len()))
            .filter(|&d| d > 0)
            .ok_or(StoreError::UnknownDimension)?;
        for record in records.iter() {
            if record.embedding.len() != dimension {
                return Err(StoreError::DimensionMismatch {
                    id: record.id.clone(),
                    expected: dimension,
                    found: record.embedding.len(),
                });
            }
            let violations = record::collect_violations(record);
            if !violations.is_empty() {
                return Err(ValidationError {
                    id: record.id.clone(),
                    violations,
                }
                .into());
            }
        }
        records.sort_unstable_by(|a, b| a.id.cmp(&b.id));
        if let Some(pair) = records.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(StoreError::DuplicateId(pair[0].id.clone()));
        }
        Ok(())
    }

    fn assemble(
        records: Vec<MemoryRecord>,
        options: IngestOptions,
        strategy: graph::Strategy,
    ) -> Result<Self, StoreError> {
        let dimension = options
            .dimension
            .or_else(|| records.first().map(|r| r.embedding.len()))
            .ok_or(StoreError::UnknownDimension)?;
        let vectors: Vec<f32> = records
            .iter()
            .flat_map(|r| r.embedding.iter().copied())
            .collect();
        let (neighbors, partitions) = graph::knn_graph(
            graph::Rows {
                data: &vectors,
                dim: dimension,
            },
            options.k,
            strategy,
        );
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Ok(Self {
            records,
            index,
            vectors,
            neighbors,
            partitions,
            dimension,
            k: options.k,
            metadata: options.metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metadata(&self) -> &StoreMetadata {
        &self.metadata
    }

    /// Records in ascending id order.
    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&MemoryRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub(crate) fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Out-neighbors of a record, nearest first.
    pub fn neighbors(&self, id: &str) -> Option<Vec<&str>> {
        let i = self.position(id)?;
        Some(
            self.neighbors[i]
                .iter()
                .map(|&j| self.records[j as usize].id.as_str())
                .collect(),
        )
    }

    pub(crate) fn neighbor_indices(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub(crate) fn rows(&self) -> Rows<'_> {
        Rows {
            data: &self.vectors,
            dim: self.dimension,
        }
    }

    pub(crate) fn embedding_at(&self, i: usize) -> &[f32] {
        self.rows().row(i)
    }

    /// Fast scores of the rows an exhaustive scan would keep; see
    /// [`partition::search`]. Falls back to scanning every row.
    pub(crate) fn approx_scan(&self, query: &[f32], floor: f64, wanted: usize) -> Vec<(f32, u32)> {
        let rows = self.rows();
        if !self.partitions.is_empty() {
            return partition::search(&self.partitions, rows, query, floor, wanted);
        }
        (0..rows.len())
            .filter_map(|i| {
                let s = dot_f32(query, rows.row(i));
                (f64::from(s) >= floor).then_some((s, i as u32))
            })
            .collect()
    }
}
