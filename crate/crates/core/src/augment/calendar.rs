//! ISO-8601 dates to Unix seconds at the start of the stated period.

use chrono::NaiveDate;

use crate::memory::Granularity;

/// Parses `YYYY`, `YYYY-MM` or `YYYY-MM-DD` and returns midnight UTC of the
/// first day of that period with its granularity.
pub fn iso_to_timestamp(iso: &str) -> Option<(i64, Granularity)> {
    let parts: Vec<&str> = iso.trim().split('-').collect();
    let number = |s: &str, width: usize| -> Option<u32> {
        (s.len() == width && s.bytes().all(|b| b.is_ascii_digit()))
            .then(|| s.parse().ok())
            .flatten()
    };
    let (year, month, day, granularity) = match parts.as_slice() {
        [y] => (number(y, 4)?, 1, 1, Granularity::Year),
        [y, m] => (number(y, 4)?, number(m, 2)?, 1, Granularity::Month),
        [y, m, d] => (
            number(y, 4)?,
            number(m, 2)?,
            number(d, 2)?,
            Granularity::Day,
        ),
        _ => return None,
    };
    let date = NaiveDate::from_ymd_opt(year as i32, month, day)?;
    Some((
        date.and_hms_opt(0, 0, 0)?.and_utc().timestamp(),
        granularity,
    ))
}

/// Midpoint of the known timestamps, rounded toward negative infinity, or
/// 0 when none are known.
pub fn corpus_midpoint(known: &[i64]) -> i64 {
    match (known.iter().min(), known.iter().max()) {
        (Some(&lo), Some(&hi)) => ((i128::from(lo) + i128::from(hi)).div_euclid(2)) as i64,
        _ => 0,
    }
}
