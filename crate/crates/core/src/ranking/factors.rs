use super::RankingError;

/// Factor given to candidates whose metadata is missing for a family.
pub const MISSING_FACTOR: f64 = 0.5;

/// Converts one family of raw distances into proximity factors in [0, 1]:
/// `1 - (d - min) / (max - min)` over the present distances, `1` for every
/// present entry when all present distances are equal, and
/// [`MISSING_FACTOR`] for absent ones.
pub fn proximity_factors(distances: &[Option<f64>]) -> Result<Vec<f64>, RankingError> {
    if distances.is_empty() {
        return Err(RankingError::EmptyList);
    }
    let (lo, hi) = distances
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    let span = hi - lo;
    Ok(distances
        .iter()
        .map(|d| match d {
            None => MISSING_FACTOR,
            Some(_) if span <= 0.0 => 1.0,
            Some(d) => (1.0 - (d - lo) / span).clamp(0.0, 1.0),
        })
        .collect())
}
