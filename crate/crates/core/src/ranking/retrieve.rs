use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    emotional_distance, proximity_factors, spatial_distance, temporal_distance, Expansion,
    FactorToggles, RankedMemory, RankingError, RetrievalExplanation, RetrievalParams,
};
use crate::embedding::{approx_margin, dot, Embedder, EmbeddingVector};
use crate::memory::{by_score_then_index, MemoryRecord, MemoryStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryPoint {
    pub record_id: String,
    pub cosine: f64,
}

fn check_query(query: &EmbeddingVector, store: &MemoryStore) -> Result<(), RankingError> {
    if store.is_empty() {
        return Err(RankingError::EmptyStore);
    }
    if query.dimension() != store.dimension() {
        return Err(RankingError::DimensionMismatch {
            expected: store.dimension(),
            found: query.dimension(),
        });
    }
    Ok(())
}

/// Entry points as `(cosine, row)` pairs, best first.
///
/// A single-precision pass over every row keeps only rows that could make
/// the cut, then the survivors are re-scored with the canonical [`dot`]. The
/// filter keeps every row whose exact score can reach the threshold and
/// the `max_entries`-th best exact score, so the result equals an
/// exhaustive exact scan.
fn entry_rows(
    query: &[f32],
    store: &MemoryStore,
    params: &RetrievalParams,
) -> Result<Vec<(f64, u32)>, RankingError> {
    let rows = store.rows();
    let margin = approx_margin(store.dimension());
    let threshold = params.similarity_threshold;
    let wanted = params.max_entries;

    let mut approx = store.approx_scan(query, threshold - margin, wanted);
    if approx.len() > wanted {
        approx.select_nth_unstable_by(wanted - 1, |a, b| b.0.total_cmp(&a.0));
        let cutoff = f64::from(approx[wanted - 1].0) - 2.0 * margin;
        approx.retain(|&(s, _)| f64::from(s) >= cutoff);
    }
    let mut exact: Vec<(f64, u32)> = approx
        .into_iter()
        .map(|(_, i)| (dot(query, rows.row(i as usize)), i))
        .filter(|&(c, _)| c >= threshold)
        .collect();
    exact.sort_unstable_by(by_score_then_index);
    exact.truncate(wanted);
    if exact.is_empty() {
        Err(RankingError::NoEntryPoint)
    } else {
        Ok(exact)
    }
}

/// Records whose cosine with the query reaches the threshold, best first
/// (ties by ascending id), at most `max_entries`. The first is the anchor.
pub fn select_entry_points(
    query: &EmbeddingVector,
    store: &MemoryStore,
    params: &RetrievalParams,
) -> Result<Vec<EntryPoint>, RankingError> {
    params.validate()?;
    check_query(query, store)?;
    Ok(entry_rows(query.as_slice(), store, params)?
        .into_iter()
        .map(|(cosine, i)| EntryPoint {
            record_id: store.records()[i as usize].id.clone(),
            cosine,
        })
        .collect())
}

/// Raw inputs for one candidate: its cosine with the query and its
/// distance to the anchor in each family (`None` when metadata is missing).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDistances<'a> {
    pub record_id: &'a str,
    pub cosine: f64,
    pub emotional: Option<f64>,
    pub spatial: Option<f64>,
    pub temporal: Option<f64>,
    pub relevance: f64,
}

impl<'a> CandidateDistances<'a> {
    pub fn measure(anchor: &MemoryRecord, record: &'a MemoryRecord, cosine: f64) -> Self {
        Self {
            record_id: &record.id,
            cosine,
            emotional: Some(emotional_distance(anchor.affect(), record.affect())),
            spatial: anchor
                .coordinates()
                .zip(record.coordinates())
                .map(|(a, b)| spatial_distance(a, b)),
            temporal: anchor
                .known_timestamp()
                .zip(record.known_timestamp())
                .map(|(a, b)| temporal_distance(a, b)),
            relevance: record.relevance_score,
        }
    }
}

struct Scored<'a> {
    record_id: &'a str,
    cosine: f64,
    emotional: f64,
    spatial: f64,
    temporal: f64,
    relevance: f64,
    compound: f64,
}

fn family(
    enabled: bool,
    pool: &[CandidateDistances<'_>],
    pick: fn(&CandidateDistances<'_>) -> Option<f64>,
) -> Vec<f64> {
    if !enabled {
        return vec![1.0; pool.len()];
    }
    let raw: Vec<Option<f64>> = pool.iter().map(pick).collect();
    proximity_factors(&raw).expect("pool is non-empty")
}

fn score<'a>(pool: &[CandidateDistances<'a>], toggles: &FactorToggles) -> Vec<Scored<'a>> {
    if pool.is_empty() {
        return Vec::new();
    }
    let emotional = family(toggles.use_emotional, pool, |c| c.emotional);
    let spatial = family(toggles.use_spatial, pool, |c| c.spatial);
    let temporal = family(toggles.use_temporal, pool, |c| c.temporal);
    pool.iter()
        .enumerate()
        .map(|(i, c)| {
            let relevance = if toggles.use_relevance {
                c.relevance
            } else {
                1.0
            };
            Scored {
                record_id: c.record_id,
                cosine: c.cosine,
                emotional: emotional[i],
                spatial: spatial[i],
                temporal: temporal[i],
                relevance,
                // A negative cosine times a zero factor gives -0.0, which
                // must tie with +0.0 rather than sort below it.
                compound: c.cosine * emotional[i] * spatial[i] * temporal[i] * relevance + 0.0,
            }
        })
        .collect()
}

fn by_compound(a: &Scored<'_>, b: &Scored<'_>) -> Ordering {
    b.compound
        .total_cmp(&a.compound)
        .then_with(|| a.record_id.cmp(b.record_id))
}

fn into_ranked(mut scored: Vec<Scored<'_>>, limit: usize, first_rank: usize) -> Vec<RankedMemory> {
    if limit == 0 {
        return Vec::new();
    }
    if scored.len() > limit {
        scored.select_nth_unstable_by(limit - 1, by_compound);
        scored.truncate(limit);
    }
    scored.sort_unstable_by(by_compound);
    scored
        .into_iter()
        .enumerate()
        .map(|(i, s)| RankedMemory {
            record_id: s.record_id.to_string(),
            cosine: s.cosine,
            emotional_factor: s.emotional,
            spatial_factor: s.spatial,
            temporal_factor: s.temporal,
            relevance_factor: s.relevance,
            compound_score: s.compound,
            rank: first_rank + i,
        })
        .collect()
}

/// Normalizes each distance family across `pool`, multiplies the factors
/// into compound scores and returns every candidate ranked from 1.
pub fn rank_distances(
    pool: &[CandidateDistances<'_>],
    toggles: &FactorToggles,
) -> Vec<RankedMemory> {
    into_ranked(score(pool, toggles), pool.len(), 1)
}

/// Ranks candidates against an anchor. Distances are normalized across the
/// candidate list, so the anchor must not be part of it.
pub fn compound_rank(
    anchor: &MemoryRecord,
    candidates: &[(&MemoryRecord, f64)],
    params: &RetrievalParams,
) -> Vec<RankedMemory> {
    let pool: Vec<_> = candidates
        .iter()
        .map(|&(r, cosine)| CandidateDistances::measure(anchor, r, cosine))
        .collect();
    rank_distances(&pool, &params.factor_toggles)
}

/// Embeds the query with `embedder` and runs [`retrieve_embedding`].
pub fn retrieve(
    query_text: &str,
    store: &MemoryStore,
    params: &RetrievalParams,
    embedder: &dyn Embedder,
) -> Result<RetrievalExplanation, RankingError> {
    params.validate()?;
    if store.is_empty() {
        return Err(RankingError::EmptyStore);
    }
    let query = embedder.embed(query_text)?;
    retrieve_embedding(query_text, &query, store, params)
}

/// Full retrieval for an already embedded query. When no record meets the
/// threshold the explanation comes back flagged with no candidates.
pub fn retrieve_embedding(
    query_text: &str,
    query: &EmbeddingVector,
    store: &MemoryStore,
    params: &RetrievalParams,
) -> Result<RetrievalExplanation, RankingError> {
    params.validate()?;
    check_query(query, store)?;
    let q = query.as_slice();

    let entries = match entry_rows(q, store, params) {
        Ok(entries) => entries,
        Err(RankingError::NoEntryPoint) => {
            return Ok(RetrievalExplanation {
                query_text: query_text.to_string(),
                entry_point_id: None,
                no_entry_point: true,
                candidates: Vec::new(),
                params: params.clone(),
            })
        }
        Err(e) => return Err(e),
    };
    let (anchor_cos, anchor_row) = entries[0];
    let anchor_row = anchor_row as usize;
    let records = store.records();
    let anchor = &records[anchor_row];

    let measure =
        |i: usize| CandidateDistances::measure(anchor, &records[i], dot(q, store.embedding_at(i)));
    let pool: Vec<CandidateDistances<'_>> = match params.expansion {
        Expansion::FullScan => (0..records.len())
            .filter(|&i| i != anchor_row)
            .map(measure)
            .collect(),
        Expansion::Graph1Hop => {
            let mut reached = BTreeSet::new();
            for &(_, row) in &entries {
                reached.insert(row as usize);
                reached.extend(
                    store
                        .neighbor_indices(row as usize)
                        .iter()
                        .map(|&j| j as usize),
                );
            }
            reached.remove(&anchor_row);
            reached.into_iter().map(measure).collect()
        }
    };

    let mut candidates = Vec::with_capacity(params.max_entries);
    candidates.push(RankedMemory {
        record_id: anchor.id.clone(),
        cosine: anchor_cos,
        emotional_factor: 1.0,
        spatial_factor: 1.0,
        temporal_factor: 1.0,
        relevance_factor: 1.0,
        compound_score: anchor_cos,
        rank: 1,
    });
    let scored = score(&pool, &params.factor_toggles);
    candidates.extend(into_ranked(scored, params.max_entries - 1, 2));

    Ok(RetrievalExplanation {
        query_text: query_text.to_string(),
        entry_point_id: Some(anchor.id.clone()),
        no_entry_point: false,
        candidates,
        params: params.clone(),
    })
}
