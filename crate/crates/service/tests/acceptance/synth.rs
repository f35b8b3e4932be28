//! Random records, stores and queries for the property criteria.

use rand::Rng;

use episodic_core::embedding::EmbeddingVector;
use episodic_core::memory::{EmotionEntry, Granularity, MemoryRecord, MemoryStore};

pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(v) = EmbeddingVector::normalize(&raw) {
            return v.into_vec();
        }
    }
}

/// `center` plus uniform noise of the given half-width, renormalized.
pub fn near(rng: &mut impl Rng, center: &[f32], spread: f64) -> Vec<f32> {
    let raw: Vec<f64> = center
        .iter()
        .map(|&c| f64::from(c) + rng.gen_range(-spread..spread))
        .collect();
    EmbeddingVector::normalize(&raw)
        .expect("noisy center is not degenerate")
        .into_vec()
}

/// A valid record with random affect, place, date and relevance. About a
/// tenth of records lack a place and another tenth have an unknown date.
pub fn record(rng: &mut impl Rng, id: String, embedding: Vec<f32>) -> MemoryRecord {
    let valence = rng.gen_range(-1.0..=1.0);
    let arousal = rng.gen_range(-1.0..=1.0);
    let placed = rng.gen_bool(0.9);
    let granularity = match rng.gen_range(0..10) {
        0 => Granularity::Unknown,
        1 => Granularity::Year,
        2 => Granularity::Month,
        _ => Granularity::Day,
    };
    MemoryRecord {
        first_person_narrative: format!("I remember scene {id}."),
        id,
        scene_background: String::new(),
        narrator_intro: String::new(),
        general_context: String::new(),
        expert_commentary: String::new(),
        characters: Vec::new(),
        emotions: vec![EmotionEntry {
            label: "mixed".into(),
            valence,
            arousal,
        }],
        valence,
        arousal,
        // 1800 to 2000.
        timestamp: rng.gen_range(-5_364_662_400i64..946_684_800),
        granularity,
        latitude: placed.then(|| rng.gen_range(-90.0..=90.0)),
        longitude: placed.then(|| rng.gen_range(-180.0..=180.0)),
        relevance_score: rng.gen_range(0.0..=1.0),
        embedding,
        flags: Vec::new(),
    }
}

/// `n` random records; the last `duplicates` copy earlier records under new
/// ids so exact score ties occur.
pub fn records(rng: &mut impl Rng, n: usize, dim: usize, duplicates: usize) -> Vec<MemoryRecord> {
    let fresh = n - duplicates;
    let mut out: Vec<MemoryRecord> = (0..fresh)
        .map(|i| {
            let e = unit_vector(rng, dim);
            record(rng, format!("r{i:04}"), e)
        })
        .collect();
    for i in 0..duplicates {
        let mut copy = out[rng.gen_range(0..fresh)].clone();
        copy.id = format!("d{i:04}");
        out.push(copy);
    }
    out
}

pub fn store(records: Vec<MemoryRecord>, k: usize) -> MemoryStore {
    MemoryStore::ingest(records, k).expect("synthetic records are valid")
}

/// Clustered records: `topics` random centers with records spread around
/// each, as real scene embeddings group by subject.
pub fn clustered(
    rng: &mut impl Rng,
    n: usize,
    dim: usize,
    topics: usize,
    spread: f64,
) -> (Vec<Vec<f32>>, Vec<MemoryRecord>) {
    let centers: Vec<Vec<f32>> = (0..topics).map(|_| unit_vector(rng, dim)).collect();
    let records = (0..n)
        .map(|i| {
            let e = near(rng, &centers[i % topics], spread);
            record(rng, format!("m{i:06}"), e)
        })
        .collect();
    (centers, records)
}
