//! Raw distances between a record and the anchor, one per metadata family.

/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Euclidean distance between two (valence, arousal) points.
pub fn emotional_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Haversine great-circle distance in kilometres between (lat, lon) pairs
/// given in degrees.
pub fn spatial_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lat2) = (a.0.to_radians(), b.0.to_radians());
    let dlat = (b.0 - a.0).to_radians();
    let dlon = (b.1 - a.1).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Absolute difference in seconds.
pub fn temporal_distance(a: i64, b: i64) -> f64 {
    (i128::from(a) - i128::from(b)).unsigned_abs() as f64
}
