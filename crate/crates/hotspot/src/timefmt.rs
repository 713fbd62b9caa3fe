//! ISO-8601 timestamps in and out of CSV files.

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use hotspot_core::time::Timestamp;

const NAIVE_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y/%m/%d %H:%M:%S%.f", "%d/%m/%Y %H:%M:%S%.f"];

/// Parses RFC 3339, a naive date-time (taken as UTC), a bare date (UTC
/// midnight) or Unix seconds.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp::from_millis(t.timestamp_millis()));
    }
    for f in NAIVE_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Some(Timestamp::from_millis(t.and_utc().timestamp_millis()));
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(Timestamp::from_millis(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp_millis()));
    }
    let secs: f64 = s.parse().ok()?;
    secs.is_finite().then(|| Timestamp::from_millis((secs * 1000.0).round() as i64))
}

/// `2019-09-01T08:00:00.000Z`.
pub fn format_timestamp(t: Timestamp) -> String {
    match DateTime::<Utc>::from_timestamp_millis(t.millis()) {
        Some(d) => d.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
        None => t.millis().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        let t = parse_timestamp("2021-09-01T08:07:03Z").unwrap();
        assert_eq!(t.millis(), 1_630_483_623_000);
        assert_eq!(parse_timestamp("2021-09-01 08:07:03"), Some(t));
        assert_eq!(parse_timestamp("2021-09-01T10:07:03+02:00"), Some(t));
        assert_eq!(parse_timestamp("1630483623"), Some(t));
        assert_eq!(parse_timestamp("2021-09-01").unwrap().millis(), 1_630_454_400_000);
        assert_eq!(format_timestamp(t), "2021-09-01T08:07:03.000Z");
        assert_eq!(parse_timestamp(&format_timestamp(Timestamp::from_millis(1_234_567))).unwrap().millis(), 1_234_567);
        assert_eq!(parse_timestamp("yesterday"), None);
    }
}
