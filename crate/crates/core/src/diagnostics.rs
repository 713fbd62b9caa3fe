//! Descriptive statistics of raw PM2.5 readings.

use crate::error::{domain, Result};
use crate::geo::{GeoPoint, TileGrid};
use crate::math;
use crate::time::Timestamp;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BucketStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

/// Readings grouped by local time of day, optionally also by weekday.
#[derive(Debug, Clone, PartialEq)]
pub struct DiurnalProfile {
    pub bucket_minutes: u32,
    pub by_weekday: bool,
    /// `[weekday][bucket]` when split by weekday (Monday first), else one row.
    pub buckets: Vec<Vec<BucketStats>>,
}

impl DiurnalProfile {
    pub fn buckets_per_day(&self) -> usize {
        (24 * 60 / self.bucket_minutes) as usize
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().flatten().map(|b| b.count).sum()
    }
}

#[derive(Clone, Copy, Default)]
struct Acc {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn finish(self) -> BucketStats {
        if self.n == 0 {
            return BucketStats::default();
        }
        BucketStats { count: self.n, mean: self.mean, sd: math::sqrt(self.m2 / self.n as f64) }
    }
}

/// Mean, standard deviation and count of `pm25` per time-of-day bucket.
/// `bucket_minutes` must divide a day.
pub fn diurnal_profile(
    times: &[Timestamp],
    pm25: &[f64],
    utc_offset_s: i64,
    by_weekday: bool,
    bucket_minutes: u32,
) -> Result<DiurnalProfile> {
    if times.len() != pm25.len() {
        return Err(domain!("{} timestamps for {} values", times.len(), pm25.len()));
    }
    if bucket_minutes == 0 || (24 * 60) % bucket_minutes != 0 {
        return Err(domain!("bucket of {bucket_minutes} minutes does not divide a day"));
    }
    let per_day = (24 * 60 / bucket_minutes) as usize;
    let rows = if by_weekday { 7 } else { 1 };
    let mut acc = vec![vec![Acc::default(); per_day]; rows];
    for (t, &v) in times.iter().zip(pm25) {
        let bucket = (t.millis_of_day(utc_offset_s) / (60_000 * i64::from(bucket_minutes))) as usize;
        let row = if by_weekday { t.weekday(utc_offset_s) as usize } else { 0 };
        acc[row][bucket].push(v);
    }
    let buckets = acc.into_iter().map(|r| r.into_iter().map(Acc::finish).collect()).collect();
    Ok(DiurnalProfile { bucket_minutes, by_weekday, buckets })
}

/// Overall mean and population standard deviation.
pub fn summary(values: &[f64]) -> BucketStats {
    let mut a = Acc::default();
    values.iter().for_each(|&v| a.push(v));
    a.finish()
}

/// Fraction of readings strictly above `threshold`.
pub fn exceedance_rate(pm25: &[f64], threshold: f64) -> Result<f64> {
    if pm25.is_empty() {
        return Err(domain!("exceedance rate of an empty series"));
    }
    Ok(pm25.iter().filter(|&&v| v > threshold).count() as f64 / pm25.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileCounts {
    pub counts: Vec<usize>,
    pub outside: usize,
}

pub fn tile_counts(points: impl IntoIterator<Item = GeoPoint>, grid: &TileGrid) -> TileCounts {
    let mut counts = vec![0; grid.len()];
    let mut outside = 0;
    for p in points {
        match grid.tile_of(p) {
            Some(j) => counts[j] += 1,
            None => outside += 1,
        }
    }
    TileCounts { counts, outside }
}
