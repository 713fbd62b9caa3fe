//! Background normalization against a fleet-wide trailing rolling median.
//!
//! Each reading `i` has its baseline computed from every reading `k`, from
//! any device, with `t_i - t_k` in `[0, window]`. The window is closed at
//! both ends and includes all readings sharing `t_i`, so it is never empty.

use crate::error::{domain, Result};
use crate::ingest::RawRecord;
use crate::stats::{median_in_place, TotalF64};
use crate::time::{Timestamp, MILLIS_PER_SECOND};
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NormalizationConfig {
    pub window_minutes: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig { window_minutes: 15.0 }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_minutes > 0.0 && self.window_minutes.is_finite()) {
            return Err(domain!("window length must be positive, got {}", self.window_minutes));
        }
        Ok(())
    }

    pub fn window_millis(&self) -> i64 {
        crate::math::round(self.window_minutes * 60.0 * MILLIS_PER_SECOND as f64) as i64
    }
}

/// Multiset with O(log n) insert/remove, kept as a value -> count map.
#[derive(Debug, Default, Clone)]
struct CountedSet {
    counts: BTreeMap<TotalF64, usize>,
    len: usize,
}

impl CountedSet {
    fn insert(&mut self, v: f64) {
        *self.counts.entry(TotalF64(v)).or_insert(0) += 1;
        self.len += 1;
    }

    fn remove(&mut self, v: f64) -> bool {
        let key = TotalF64(v);
        match self.counts.get_mut(&key) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(&key);
            }
            None => return false,
        }
        self.len -= 1;
        true
    }

    fn max(&self) -> Option<f64> {
        self.counts.last_key_value().map(|(k, _)| k.0)
    }

    fn min(&self) -> Option<f64> {
        self.counts.first_key_value().map(|(k, _)| k.0)
    }
}

/// Sliding-window median over a multiset of values, maintained as a lower
/// half and an upper half with `low.len() - high.len()` in `{0, 1}`.
#[derive(Debug, Default, Clone)]
pub struct RollingMedian {
    low: CountedSet,
    high: CountedSet,
}

impl RollingMedian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.low.len + self.high.len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, v: f64) {
        match self.low.max() {
            Some(m) if v > m => self.high.insert(v),
            _ => self.low.insert(v),
        }
        self.rebalance();
    }

    /// Removes one copy of `v`; returns false if it was not present.
    pub fn remove(&mut self, v: f64) -> bool {
        let removed = self.low.remove(v) || self.high.remove(v);
        if removed {
            self.rebalance();
        }
        removed
    }

    fn rebalance(&mut self) {
        while self.low.len > self.high.len + 1 {
            let m = self.low.max().expect("non-empty");
            self.low.remove(m);
            self.high.insert(m);
        }
        while self.high.len > self.low.len {
            let m = self.high.min().expect("non-empty");
            self.high.remove(m);
            self.low.insert(m);
        }
    }

    /// Median with the midpoint rule for even counts.
    pub fn median(&self) -> Option<f64> {
        let lo = self.low.max()?;
        if self.low.len > self.high.len {
            Some(lo)
        } else {
            Some((lo + self.high.min().expect("balanced")) / 2.0)
        }
    }
}

/// Stable permutation that sorts `times` ascending.
pub fn time_order(times: &[Timestamp]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by_key(|&i| times[i]);
    order
}

/// Trailing-window median baseline for every reading, returned in input order.
/// Inputs need not be sorted.
pub fn rolling_baseline(times: &[Timestamp], values: &[f64], cfg: &NormalizationConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if times.len() != values.len() {
        return Err(domain!("{} timestamps but {} values", times.len(), values.len()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(domain!("non-finite reading {v}"));
    }
    let window = cfg.window_millis();
    let order = time_order(times);
    let mut baseline = alloc::vec![0.0; values.len()];
    let mut window_set = RollingMedian::new();
    let mut tail = 0;
    let mut head = 0;
    while head < order.len() {
        let t = times[order[head]];
        // Readings sharing a timestamp share a window.
        let mut group_end = head;
        while group_end < order.len() && times[order[group_end]] == t {
            window_set.insert(values[order[group_end]]);
            group_end += 1;
        }
        while t.millis() - times[order[tail]].millis() > window {
            window_set.remove(values[order[tail]]);
            tail += 1;
        }
        let m = window_set.median().expect("window contains the current reading");
        for &i in &order[head..group_end] {
            baseline[i] = m;
        }
        head = group_end;
    }
    Ok(baseline)
}

/// A cleaned record with its baseline and normalized value `y = pm25 - baseline`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedObservation {
    pub record: RawRecord,
    pub baseline: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    /// Observations in (stable) time order.
    pub observations: Vec<NormalizedObservation>,
    /// Empirical median of all `y`; `None` for empty input.
    pub median_y: Option<f64>,
    /// Whether the input had to be reordered by time.
    pub input_sorted: bool,
}

pub fn normalize(records: Vec<RawRecord>, cfg: &NormalizationConfig) -> Result<Normalized> {
    let times: Vec<Timestamp> = records.iter().map(|r| r.timestamp).collect();
    let values = records
        .iter()
        .map(|r| r.pm25.ok_or_else(|| domain!("record from {} at {:?} has no PM2.5", r.device_id, r.timestamp)))
        .collect::<Result<Vec<f64>>>()?;
    let baseline = rolling_baseline(&times, &values, cfg)?;
    let input_sorted = times.windows(2).all(|w| w[0] <= w[1]);
    let order = time_order(&times);
    let mut slots: Vec<Option<RawRecord>> = records.into_iter().map(Some).collect();
    let observations: Vec<NormalizedObservation> = order
        .into_iter()
        .map(|i| {
            let record = slots[i].take().expect("permutation");
            NormalizedObservation { record, baseline: baseline[i], y: values[i] - baseline[i] }
        })
        .collect();
    let mut ys: Vec<f64> = observations.iter().map(|o| o.y).collect();
    let median_y = median_in_place(&mut ys);
    Ok(Normalized { observations, median_y, input_sorted })
}

/// Sum of absolute differences between consecutive occupied time-of-day
/// bucket means of `y`. Lower is smoother.
pub fn bucket_roughness(times: &[Timestamp], y: &[f64], bucket_minutes: u32, utc_offset_s: i64) -> Result<f64> {
    if bucket_minutes == 0 || 1440 % bucket_minutes != 0 {
        return Err(domain!("bucket length {bucket_minutes} min must divide a day"));
    }
    let n_buckets = (1440 / bucket_minutes) as usize;
    let bucket_ms = bucket_minutes as i64 * 60 * MILLIS_PER_SECOND;
    let mut sums = alloc::vec![(0.0f64, 0usize); n_buckets];
    for (t, v) in times.iter().zip(y) {
        let b = (t.millis_of_day(utc_offset_s) / bucket_ms) as usize;
        sums[b].0 += v;
        sums[b].1 += 1;
    }
    let means: Vec<f64> = sums.iter().filter(|(_, c)| *c > 0).map(|(s, c)| s / *c as f64).collect();
    if means.len() < 2 {
        return Err(domain!("need at least two occupied buckets, found {}", means.len()));
    }
    Ok(means.windows(2).map(|w| crate::math::abs(w[1] - w[0])).sum())
}

/// Window-length diagnostic: for every candidate window (minutes), normalize
/// with it and report the roughness of the resulting average diurnal profile.
pub fn window_smoothness(
    times: &[Timestamp],
    values: &[f64],
    candidates: &[f64],
    bucket_minutes: u32,
    utc_offset_s: i64,
) -> Result<Vec<(f64, f64)>> {
    candidates
        .iter()
        .map(|&w| {
            let cfg = NormalizationConfig { window_minutes: w };
            let baseline = rolling_baseline(times, values, &cfg)?;
            let y: Vec<f64> = values.iter().zip(&baseline).map(|(v, b)| v - b).collect();
            Ok((w, bucket_roughness(times, &y, bucket_minutes, utc_offset_s)?))
        })
        .collect()
}
