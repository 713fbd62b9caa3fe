//! Tile-wise hotspot scores: the posterior probability that the latent
//! normalized PM2.5 at a tile centroid exceeds the city-wide median.

use crate::ensemble::EnsemblePrediction;
use crate::error::{domain, Result};
use crate::geo::{CoordinateFrame, TileGrid};
use crate::math;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HotspotConfig {
    /// Median of the normalized training values.
    pub median_y: f64,
    /// Critical probability for binary classification.
    pub p_crit: f64,
}

impl HotspotConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.median_y.is_finite() {
            return Err(domain!("median_y must be finite"));
        }
        if !(0.0..1.0).contains(&self.p_crit) {
            return Err(domain!("p_crit must lie in [0, 1), got {}", self.p_crit));
        }
        Ok(())
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * math::erfc(-z / SQRT_2)
}

/// `P[Z > (median_y - mean) / sd] = Φ((mean - median_y) / sd)`.
pub fn hotspot_score(mean: f64, variance: f64, median_y: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(domain!("hotspot score needs positive variance, got {variance}"));
    }
    Ok(std_normal_cdf((mean - median_y) / math::sqrt(variance)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileScore {
    pub mean: f64,
    pub variance: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotspotGrid {
    pub grid: TileGrid,
    /// `None` where no prediction could be scored.
    pub scores: Vec<Option<TileScore>>,
    /// Training observations per tile; zero marks extrapolated tiles.
    pub n_measurements: Vec<usize>,
}

impl HotspotGrid {
    pub fn h(&self) -> Vec<Option<f64>> {
        self.scores.iter().map(|s| s.map(|s| s.h)).collect()
    }
}

/// Scores every tile centroid with `predict` (an ensemble or any other
/// posterior), using `frame` to map centroids into kernel coordinates.
pub fn score_grid<F>(
    grid: &TileGrid,
    frame: &CoordinateFrame,
    median_y: f64,
    n_measurements: Vec<usize>,
    mut predict: F,
) -> Result<HotspotGrid>
where
    F: FnMut(&[f64; 2]) -> EnsemblePrediction,
{
    if n_measurements.len() != grid.len() {
        return Err(domain!("{} tile counts for {} tiles", n_measurements.len(), grid.len()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let q = frame.coords(grid.centroid(j)?);
        let p = predict(&q);
        scores.push(tile_score(j, p.mean, p.variance, median_y));
    }
    Ok(HotspotGrid { grid: grid.clone(), scores, n_measurements })
}

/// Score of tile `j`, or `None` (with a warning) when the variance is not positive.
pub fn tile_score(j: usize, mean: f64, variance: f64, median_y: f64) -> Option<TileScore> {
    let score = hotspot_score(mean, variance, median_y).ok().map(|h| TileScore { mean, variance, h });
    if score.is_none() {
        log::warn!("tile {j} has non-positive predictive variance {variance}; left unscored");
    }
    score
}

/// `Some(h > p_crit)` for scored tiles.
pub fn classify(grid: &HotspotGrid, p_crit: f64) -> Vec<Option<bool>> {
    grid.scores.iter().map(|s| s.map(|s| s.h > p_crit)).collect()
}
