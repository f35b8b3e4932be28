//! Compound-score retrieval.
//!
//! Retrieval runs in three steps:
//!
//! 1. **Entry points.** Records whose cosine with the query reaches the
//!    similarity threshold, best first, capped at `max_entries`. The first
//!    one is the *anchor*.
//! 2. **Distances.** For every other record in the candidate pool, the
//!    emotional (valence/arousal), spatial (great-circle) and temporal
//!    distance to the anchor. Each family is min-max normalized across the
//!    pool and flipped into a proximity factor, so nearer means larger.
//! 3. **Compound score.** `cosine × emotional × spatial × temporal`; disabled
//!    factors contribute 1. Candidates sort by compound score, ties by id.
//!
//! The anchor is returned first with all factors at 1.

mod distance;
mod factors;
mod retrieve;

use serde::{Deserialize, Serialize};

pub use distance::{emotional_distance, spatial_distance, temporal_distance, EARTH_RADIUS_KM};
pub use factors::{proximity_factors, MISSING_FACTOR};
pub use retrieve::{
    compound_rank, rank_distances, retrieve, retrieve_embedding, select_entry_points,
    CandidateDistances, EntryPoint,
};

use crate::embedding::EmbedError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankingError {
    #[error("the memory store is empty")]
    EmptyStore,
    #[error("no record meets the similarity threshold")]
    NoEntryPoint,
    #[error("invalid retrieval parameters: {0}")]
    InvalidParams(String),
    #[error("query dimension {found} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot normalize an empty distance list")]
    EmptyList,
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

impl RankingError {
    pub fn code(&self) -> &'static str {
        match self {
            RankingError::EmptyStore => "empty_store",
            RankingError::NoEntryPoint => "no_entry_point",
            RankingError::InvalidParams(_) => "invalid_params",
            RankingError::DimensionMismatch { .. } => "dimension_mismatch",
            RankingError::EmptyList => "empty_list",
            RankingError::Embedding(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    /// Rank every record in the store.
    #[default]
    FullScan,
    /// Rank the entry points and their graph out-neighbors only.
    #[serde(rename = "graph_1hop")]
    Graph1Hop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorToggles {
    pub use_emotional: bool,
    pub use_spatial: bool,
    pub use_temporal: bool,
    /// Multiplies the expert relevance score in as a fourth factor.
    pub use_relevance: bool,
}

impl Default for FactorToggles {
    fn default() -> Self {
        Self {
            use_emotional: true,
            use_spatial: true,
            use_temporal: true,
            use_relevance: false,
        }
    }
}

impl FactorToggles {
    /// Plain cosine ranking.
    pub fn cosine_only() -> Self {
        Self {
            use_emotional: false,
            use_spatial: false,
            use_temporal: false,
            use_relevance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalParams {
    pub max_entries: usize,
    pub similarity_threshold: f64,
    pub expansion: Expansion,
    pub factor_toggles: FactorToggles,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            max_entries: 5,
            similarity_threshold: 0.1,
            expansion: Expansion::FullScan,
            factor_toggles: FactorToggles::default(),
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<(), RankingError> {
        if self.max_entries == 0 {
            return Err(RankingError::InvalidParams(
                "max_entries must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(RankingError::InvalidParams(format!(
                "similarity_threshold {} is outside [0, 1]",
                self.similarity_threshold
            )));
        }
        Ok(())
    }
}

/// One retrieved record with every factor that produced its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMemory {
    pub record_id: String,
    pub cosine: f64,
    pub emotional_factor: f64,
    pub spatial_factor: f64,
    pub temporal_factor: f64,
    /// 1 unless the relevance toggle is on.
    pub relevance_factor: f64,
    pub compound_score: f64,
    pub rank: usize,
}

/// The ranked evidence behind one retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalExplanation {
    pub query_text: String,
    pub entry_point_id: Option<String>,
    /// Set when nothing met the similarity threshold; `candidates` is empty.
    pub no_entry_point: bool,
    pub candidates: Vec<RankedMemory>,
    pub params: RetrievalParams,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(RetrievalParams::default().validate().is_ok());
        let bad = RetrievalParams {
            max_entries: 0,
            ..RetrievalParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(RankingError::InvalidParams(_))
        ));
        let bad = RetrievalParams {
            similarity_threshold: 1.5,
            ..RetrievalParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn params_json_shape() {
        let json = serde_json::to_value(RetrievalParams {
            expansion: Expansion::Graph1Hop,
            ..RetrievalParams::default()
        })
        .unwrap();
        assert_eq!(json["expansion"], "graph_1hop");
        let parsed: RetrievalParams =
            serde_json::from_str(r#"{"max_entries":3,"expansion":"full_scan"}"#).unwrap();
        assert_eq!(parsed.max_entries, 3);
        assert!(parsed.factor_toggles.use_spatial);
    }
}
