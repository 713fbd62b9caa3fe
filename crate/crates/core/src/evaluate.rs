//! Scoring hotspot maps against a known ground truth: day-based splits, rank
//! correlation, reliability bins, Brier score, ECE and isotonic
//! recalibration.

use crate::error::{domain, Result};
use crate::stats::TotalF64;
use alloc::vec::Vec;
use rand::Rng;

/// Calendar days (days since the epoch) held out for testing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaySplit {
    pub test_days: Vec<i64>,
    pub train_days: Vec<i64>,
}

impl DaySplit {
    pub fn is_test(&self, day: i64) -> bool {
        self.test_days.binary_search(&day).is_ok()
    }
}

/// Draws `n_test` of the distinct days in `days` uniformly without
/// replacement. Both sides of the split are returned sorted.
pub fn split_days<R: Rng + ?Sized>(days: &[i64], n_test: usize, rng: &mut R) -> Result<DaySplit> {
    let mut distinct = days.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if n_test > distinct.len() {
        return Err(domain!("{n_test} test days requested but only {} distinct days present", distinct.len()));
    }
    for k in 0..n_test {
        let j = rng.random_range(k..distinct.len());
        distinct.swap(k, j);
    }
    let mut train_days = distinct.split_off(n_test);
    let mut test_days = distinct;
    test_days.sort_unstable();
    train_days.sort_unstable();
    Ok(DaySplit { test_days, train_days })
}

/// `b_i = f_i > median_y`.
pub fn exceedance_labels(noise_free: &[f64], median_y: f64) -> Vec<bool> {
    noise_free.iter().map(|&f| f > median_y).collect()
}

/// 1-based ranks with ties given their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| TotalF64(values[i]));
    let mut out = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / crate::math::sqrt(saa * sbb))
}

/// Spearman rank correlation. `None` for mismatched lengths, fewer than two
/// values, non-finite values or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 || a.iter().chain(b).any(|v| !v.is_finite()) {
        return None;
    }
    pearson(&ranks(a), &ranks(b))
}

/// Spearman correlation over tiles with more than `threshold` measurements.
pub fn spearman_filtered(h: &[f64], truth: &[f64], counts: &[usize], threshold: i64) -> Option<f64> {
    if h.len() != counts.len() || truth.len() != counts.len() {
        return None;
    }
    let keep: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] as i64 > threshold).collect();
    let a: Vec<f64> = keep.iter().map(|&j| h[j]).collect();
    let b: Vec<f64> = keep.iter().map(|&j| truth[j]).collect();
    spearman(&a, &b)
}

pub const N_BINS: usize = 10;

/// Bin of a score in `[0, 1]`: `[0, 0.1]`, `(0.1, 0.2]`, …, `(0.9, 1]`.
pub fn bin_index(h: f64) -> Option<usize> {
    if !(0.0..=1.0).contains(&h) {
        return None;
    }
    Some((1..N_BINS).find(|&k| h <= k as f64 / N_BINS as f64).unwrap_or(N_BINS) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CalibrationBin {
    /// 1-based.
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub score_sum: f64,
    pub exceed_count: usize,
}

impl CalibrationBin {
    /// Mean score in the bin.
    pub fn conf(&self) -> Option<f64> {
        (self.count > 0).then(|| self.score_sum / self.count as f64)
    }

    /// Proportion of exceedances in the bin.
    pub fn exc(&self) -> Option<f64> {
        (self.count > 0).then(|| self.exceed_count as f64 / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reliability {
    pub bins: [CalibrationBin; N_BINS],
    /// Observations without a score, left out of every bin.
    pub excluded: usize,
}

impl Reliability {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Count-weighted mean `|exc - conf|`; empty bins carry no weight.
    pub fn ece(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        self.bins
            .iter()
            .filter_map(|b| Some(b.count as f64 / n as f64 * crate::math::abs(b.exc()? - b.conf()?)))
            .sum()
    }

    /// `exc` values of occupied bins, in bin order.
    pub fn occupied_exc(&self) -> Vec<f64> {
        self.bins.iter().filter_map(CalibrationBin::exc).collect()
    }
}

/// Bins `(score, label)` pairs. `None` scores are counted as excluded.
pub fn reliability(scores: &[Option<f64>], labels: &[bool]) -> Result<Reliability> {
    if scores.len() != labels.len() {
        return Err(domain!("{} scores for {} labels", scores.len(), labels.len()));
    }
    let mut bins: [CalibrationBin; N_BINS] = core::array::from_fn(|k| CalibrationBin {
        index: k + 1,
        lower: k as f64 / N_BINS as f64,
        upper: (k + 1) as f64 / N_BINS as f64,
        ..Default::default()
    });
    let mut excluded = 0;
    for (s, &b) in scores.iter().zip(labels) {
        let Some(s) = *s else {
            excluded += 1;
            continue;
        };
        let k = bin_index(s).ok_or_else(|| domain!("score {s} outside [0, 1]"))?;
        bins[k].count += 1;
        bins[k].score_sum += s;
        bins[k].exceed_count += usize::from(b);
    }
    Ok(Reliability { bins, excluded })
}

/// Mean squared difference between scores and 0/1 labels.
pub fn brier(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(domain!("{} scores for {} labels", scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(domain!("Brier score of an empty test set"));
    }
    let sse: f64 = scores.iter().zip(labels).map(|(h, &b)| (h - f64::from(u8::from(b))) * (h - f64::from(u8::from(b)))).sum();
    Ok(sse / scores.len() as f64)
}

/// Weighted least-squares projection of `y` onto non-decreasing sequences
/// (pool adjacent violators). `weights` must be positive.
pub fn isotonic_regression(y: &[f64], weights: &[f64]) -> Vec<f64> {
    let blocks = pava(y.iter().copied().zip(weights.iter().copied()).map(|(v, w)| (v, w, 1)));
    blocks.iter().flat_map(|b| core::iter::repeat_n(b.mean, b.len)).collect()
}

#[derive(Debug, Clone, Copy)]
struct Block {
    mean: f64,
    weight: f64,
    /// Number of pooled input items.
    len: usize,
}

fn pava(items: impl Iterator<Item = (f64, f64, usize)>) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for (mean, weight, len) in items {
        let mut cur = Block { mean, weight, len };
        while let Some(prev) = blocks.last() {
            if prev.mean <= cur.mean {
                break;
            }
            let w = prev.weight + cur.weight;
            cur = Block { mean: (prev.mean * prev.weight + cur.mean * cur.weight) / w, weight: w, len: prev.len + cur.len };
            blocks.pop();
        }
        blocks.push(cur);
    }
    blocks
}

/// Monotone map from raw to calibrated scores.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsotonicModel {
    /// Ascending score breakpoints.
    pub x: Vec<f64>,
    /// Non-decreasing calibrated values at the breakpoints.
    pub y: Vec<f64>,
}

impl IsotonicModel {
    pub fn identity() -> Self {
        IsotonicModel { x: alloc::vec![0.0, 1.0], y: alloc::vec![0.0, 1.0] }
    }

    /// Piecewise-linear interpolation, constant beyond the end breakpoints,
    /// clamped to `[0, 1]`.
    pub fn apply(&self, h: f64) -> f64 {
        let (x, y) = (&self.x, &self.y);
        let v = if h <= x[0] {
            y[0]
        } else if h >= x[x.len() - 1] {
            y[y.len() - 1]
        } else {
            let k = x.partition_point(|&b| b <= h);
            let (x0, x1, y0, y1) = (x[k - 1], x[k], y[k - 1], y[k]);
            if x1 == x0 {
                y1
            } else {
                y0 + (h - x0) / (x1 - x0) * (y1 - y0)
            }
        };
        v.clamp(0.0, 1.0)
    }
}

/// Fits a calibration map to training `(score, label)` pairs. Pairs sharing
/// a score are pooled first; each resulting block contributes breakpoints at
/// its lowest and highest score.
pub fn isotonic_fit(scores: &[f64], labels: &[bool]) -> Result<IsotonicModel> {
    if scores.len() != labels.len() {
        return Err(domain!("{} scores for {} labels", scores.len(), labels.len()));
    }
    if scores.len() < 2 {
        return Err(domain!("isotonic fit needs at least two pairs"));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(domain!("non-finite score {s}"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by_key(|&i| TotalF64(scores[i]));
    // Distinct scores with their label sums and counts.
    let mut xs: Vec<(f64, f64, usize)> = Vec::new();
    for &i in &order {
        let b = f64::from(u8::from(labels[i]));
        match xs.last_mut() {
            Some(last) if last.0 == scores[i] => {
                last.1 += b;
                last.2 += 1;
            }
            _ => xs.push((scores[i], b, 1)),
        }
    }
    let blocks = pava(xs.iter().map(|&(_, s, c)| (s / c as f64, c as f64, 1)));
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut k = 0;
    for b in blocks {
        let (lo, hi) = (xs[k].0, xs[k + b.len - 1].0);
        x.push(lo);
        y.push(b.mean);
        if hi > lo {
            x.push(hi);
            y.push(b.mean);
        }
        k += b.len;
    }
    Ok(IsotonicModel { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn day_split_sizes() {
        let days: Vec<i64> = (0..30).flat_map(|d| [d, d]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = split_days(&days, 6, &mut rng).unwrap();
        assert_eq!((s.test_days.len(), s.train_days.len()), (6, 24));
        assert!(s.test_days.iter().all(|d| !s.train_days.contains(d)));
        let again = split_days(&days, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(s, again);
        assert!(split_days(&days, 0, &mut rng).unwrap().test_days.is_empty());
        assert!(split_days(&days, 31, &mut rng).is_err());
    }

    #[test]
    fn rank_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&a, &[10.0, 20.0, 30.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&a, &[1.0; 4]), None);
        let counts = [5, 6, 7, 8];
        assert_eq!(spearman_filtered(&a, &a, &counts, -1), spearman(&a, &a));
        assert_eq!(spearman_filtered(&a, &a, &counts, 8), None);
    }

    #[test]
    fn bins() {
        assert_eq!(bin_index(0.0), Some(0));
        assert_eq!(bin_index(0.1), Some(0));
        assert_eq!(bin_index(0.1000001), Some(1));
        assert_eq!(bin_index(0.3), Some(2));
        assert_eq!(bin_index(1.0), Some(9));
        assert_eq!(bin_index(1.5), None);
    }

    #[test]
    fn ece_and_brier_identities() {
        let h = [0.0, 1.0, 1.0, 0.0];
        let b = [false, true, true, false];
        let scored: Vec<Option<f64>> = h.iter().map(|v| Some(*v)).collect();
        let rel = reliability(&scored, &b).unwrap();
        assert_eq!(rel.ece(), 0.0);
        assert_eq!(brier(&h, &b).unwrap(), 0.0);
        assert_eq!(brier(&[0.5; 4], &b).unwrap(), 0.25);
        let rel = reliability(&[Some(0.55), Some(0.55), Some(0.55), Some(0.55), None], &[true, true, true, false, true]).unwrap();
        assert!((rel.ece() - 0.2).abs() < 1e-12);
        assert_eq!((rel.total(), rel.excluded), (4, 1));
    }

    #[test]
    fn isotonic_pools_violators() {
        let m = isotonic_fit(&[0.2, 0.8], &[true, false]).unwrap();
        assert_eq!((m.x.clone(), m.y.clone()), (vec![0.2, 0.8], vec![0.5, 0.5]));
        assert_eq!(m.apply(0.0), 0.5);
        let m = isotonic_fit(&[0.1, 0.2, 0.3], &[false, false, true]).unwrap();
        assert_eq!(m.y, vec![0.0, 0.0, 1.0]);
        assert!((m.apply(0.25) - 0.5).abs() < 1e-12);
        assert_eq!(IsotonicModel::identity().apply(0.37), 0.37);
        assert_eq!(isotonic_regression(&[3.0, 1.0, 2.0], &[1.0; 3]), vec![2.0, 2.0, 2.0]);
    }
}
