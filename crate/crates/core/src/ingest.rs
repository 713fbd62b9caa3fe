//! Raw sensor records and the cleaning rules applied before normalization.

use crate::error::{domain, Result};
use crate::geo::{BoundingBox, GeoPoint};
use crate::time::Timestamp;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

/// One timestamped, geolocated reading from one device.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RawRecord {
    pub device_id: String,
    pub timestamp: Timestamp,
    pub lat: f64,
    pub lon: f64,
    /// PM2.5 in µg/m³; `None` when the row had no reading.
    pub pm25: Option<f64>,
    /// Vehicle speed in m/s.
    pub speed: Option<f64>,
    /// Relative humidity in percent.
    pub rh: Option<f64>,
    /// Temperature in °C.
    pub temp: Option<f64>,
}

impl RawRecord {
    pub fn position(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CleaningConfig {
    /// Records outside this box are dropped; `None` disables the filter.
    pub bbox: Option<BoundingBox>,
    /// Half-open `[start, end)` window; `None` disables the filter.
    pub date_range: Option<(Timestamp, Timestamp)>,
    /// Readings strictly above this are treated as outliers.
    pub pm25_max: f64,
    pub drop_zero_speed: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig { bbox: None, date_range: None, pm25_max: 500.0, drop_zero_speed: true }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pm25_max > 0.0) {
            return Err(domain!("pm25_max must be positive"));
        }
        if let Some((start, end)) = self.date_range {
            if start >= end {
                return Err(domain!("date range start must precede end"));
            }
        }
        if let Some(b) = &self.bbox {
            b.validate()?;
        }
        Ok(())
    }
}

/// Records dropped by each rule, in the order the rules are applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CleaningStats {
    pub input: usize,
    pub duplicate: usize,
    pub missing_field: usize,
    pub out_of_bbox: usize,
    pub out_of_date: usize,
    pub per_second_duplicate: usize,
    pub zero_speed: usize,
    pub outlier: usize,
    pub retained: usize,
}

impl CleaningStats {
    pub fn dropped(&self) -> usize {
        self.duplicate
            + self.missing_field
            + self.out_of_bbox
            + self.out_of_date
            + self.per_second_duplicate
            + self.zero_speed
            + self.outlier
    }

    /// Flat `(rule, count)` pairs for reporting.
    pub fn entries(&self) -> [(&'static str, usize); 9] {
        [
            ("input", self.input),
            ("duplicate", self.duplicate),
            ("missing_field", self.missing_field),
            ("out_of_bbox", self.out_of_bbox),
            ("out_of_date", self.out_of_date),
            ("per_second_duplicate", self.per_second_duplicate),
            ("zero_speed", self.zero_speed),
            ("outlier", self.outlier),
            ("retained", self.retained),
        ]
    }
}

fn bits(v: Option<f64>) -> Option<u64> {
    v.map(f64::to_bits)
}

type RowKey = (String, i64, u64, u64, Option<u64>, Option<u64>, Option<u64>, Option<u64>);

fn row_key(r: &RawRecord) -> RowKey {
    (
        r.device_id.clone(),
        r.timestamp.millis(),
        r.lat.to_bits(),
        r.lon.to_bits(),
        bits(r.pm25),
        bits(r.speed),
        bits(r.rh),
        bits(r.temp),
    )
}

/// Applies the cleaning rules in a fixed order, preserving the input order of
/// the records that survive:
///
/// 1. exact duplicate rows (all fields equal) after the first,
/// 2. rows with no PM2.5 reading or non-finite coordinates,
/// 3. rows outside the bounding box,
/// 4. rows outside the date range,
/// 5. all but the first reading per device per UTC second,
/// 6. rows whose recorded speed is exactly zero (missing speed is kept),
/// 7. readings above `pm25_max`.
pub fn clean(records: Vec<RawRecord>, cfg: &CleaningConfig) -> (Vec<RawRecord>, CleaningStats) {
    let mut stats = CleaningStats { input: records.len(), ..Default::default() };
    let mut seen_rows: BTreeSet<RowKey> = BTreeSet::new();
    let mut device_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen_seconds: BTreeSet<(usize, i64)> = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());

    for r in records {
        if !seen_rows.insert(row_key(&r)) {
            stats.duplicate += 1;
            continue;
        }
        let pm_ok = r.pm25.is_some_and(f64::is_finite);
        if !pm_ok || !r.lat.is_finite() || !r.lon.is_finite() {
            stats.missing_field += 1;
            continue;
        }
        if let Some(b) = &cfg.bbox {
            if !b.contains(r.position()) {
                stats.out_of_bbox += 1;
                continue;
            }
        }
        if let Some((start, end)) = cfg.date_range {
            if r.timestamp < start || r.timestamp >= end {
                stats.out_of_date += 1;
                continue;
            }
        }
        let next_id = device_ids.len();
        let device = *device_ids.entry(r.device_id.clone()).or_insert(next_id);
        if !seen_seconds.insert((device, r.timestamp.second())) {
            stats.per_second_duplicate += 1;
            continue;
        }
        if cfg.drop_zero_speed && r.speed == Some(0.0) {
            stats.zero_speed += 1;
            continue;
        }
        if r.pm25.is_some_and(|v| v > cfg.pm25_max) {
            stats.outlier += 1;
            continue;
        }
        out.push(r);
    }
    stats.retained = out.len();
    (out, stats)
}
