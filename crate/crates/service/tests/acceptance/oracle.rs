//! Independent reference implementations. None of this calls into the
//! ranking, calendar or distance code under test.

use episodic_core::memory::{Granularity, MemoryRecord};
use episodic_core::ranking::FactorToggles;

#[derive(Debug, Clone)]
pub struct OracleRanked {
    pub id: String,
    pub cosine: f64,
    pub factors: [f64; 4],
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub anchor: Option<String>,
    pub ranked: Vec<OracleRanked>,
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        sum += a[i] as f64 * b[i] as f64;
    }
    sum
}

pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let rad = std::f64::consts::PI / 180.0;
    let p1 = lat1 * rad;
    let p2 = lat2 * rad;
    let s_lat = ((lat2 - lat1) * rad * 0.5).sin();
    let s_lon = ((lon2 - lon1) * rad * 0.5).sin();
    let a = s_lat * s_lat + p1.cos() * p2.cos() * s_lon * s_lon;
    let a = a.min(1.0);
    2.0 * 6371.0 * a.sqrt().atan2((1.0 - a).sqrt())
}

/// Days since 1970-01-01 through the Julian Day Number.
pub fn unix_days(year: i64, month: i64, day: i64) -> i64 {
    let a = (month - 14) / 12;
    let jdn = (1461 * (year + 4800 + a)) / 4 + (367 * (month - 2 - 12 * a)) / 12
        - (3 * ((year + 4900 + a) / 100)) / 4
        + day
        - 32075;
    jdn - 2_440_588
}

pub fn days_in_month(year: i64, month: i64) -> i64 {
    unix_days(
        if month == 12 { year + 1 } else { year },
        if month == 12 { 1 } else { month + 1 },
        1,
    ) - unix_days(year, month, 1)
}

fn min_max_factors(values: &[Option<f64>]) -> Vec<f64> {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for &v in &present {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    values
        .iter()
        .map(|v| match v {
            None => 0.5,
            Some(_) if hi - lo <= 0.0 => 1.0,
            Some(v) => 1.0 - (v - lo) / (hi - lo),
        })
        .collect()
}

fn known_time(r: &MemoryRecord) -> Option<i64> {
    if r.granularity == Granularity::Unknown {
        None
    } else {
        Some(r.timestamp)
    }
}

fn place(r: &MemoryRecord) -> Option<(f64, f64)> {
    Some((r.latitude?, r.longitude?))
}

/// Brute-force full-scan retrieval: entry points by cosine, then every
/// other record scored against the anchor.
pub fn retrieve(
    query: &[f32],
    records: &[MemoryRecord],
    threshold: f64,
    max_entries: usize,
    toggles: &FactorToggles,
) -> OracleResult {
    let cos: Vec<f64> = records
        .iter()
        .map(|r| cosine(query, &r.embedding))
        .collect();
    let mut entries: Vec<usize> = (0..records.len())
        .filter(|&i| cos[i] >= threshold)
        .collect();
    entries.sort_by(|&a, &b| {
        cos[b]
            .partial_cmp(&cos[a])
            .unwrap()
            .then_with(|| records[a].id.cmp(&records[b].id))
    });
    let Some(&anchor_i) = entries.first() else {
        return OracleResult {
            anchor: None,
            ranked: Vec::new(),
        };
    };
    let anchor = &records[anchor_i];
    let pool: Vec<usize> = (0..records.len()).filter(|&i| i != anchor_i).collect();

    let emo: Vec<Option<f64>> = pool
        .iter()
        .map(|&i| {
            let dv = records[i].valence - anchor.valence;
            let da = records[i].arousal - anchor.arousal;
            Some((dv * dv + da * da).sqrt())
        })
        .collect();
    let spa: Vec<Option<f64>> = pool
        .iter()
        .map(|&i| match (place(anchor), place(&records[i])) {
            (Some(a), Some(b)) => Some(haversine_km(a.0, a.1, b.0, b.1)),
            _ => None,
        })
        .collect();
    let tem: Vec<Option<f64>> = pool
        .iter()
        .map(|&i| match (known_time(anchor), known_time(&records[i])) {
            (Some(a), Some(b)) => Some((a as f64 - b as f64).abs()),
            _ => None,
        })
        .collect();
    let ones = vec![1.0; pool.len()];
    let fe = if toggles.use_emotional {
        min_max_factors(&emo)
    } else {
        ones.clone()
    };
    let fs = if toggles.use_spatial {
        min_max_factors(&spa)
    } else {
        ones.clone()
    };
    let ft = if toggles.use_temporal {
        min_max_factors(&tem)
    } else {
        ones.clone()
    };

    let mut scored: Vec<OracleRanked> = pool
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let rel = if toggles.use_relevance {
                records[i].relevance_score
            } else {
                1.0
            };
            OracleRanked {
                id: records[i].id.clone(),
                cosine: cos[i],
                factors: [fe[j], fs[j], ft[j], rel],
                score: cos[i] * fe[j] * fs[j] * ft[j] * rel,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    scored.truncate(max_entries - 1);
    let mut ranked = vec![OracleRanked {
        id: anchor.id.clone(),
        cosine: cos[anchor_i],
        factors: [1.0; 4],
        score: cos[anchor_i],
    }];
    ranked.extend(scored);
    OracleResult {
        anchor: Some(anchor.id.clone()),
        ranked,
    }
}
