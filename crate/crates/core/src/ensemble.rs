//! Bagging of GP fits on tile-biased subsamples.
//!
//! Non-empty tiles are ranked by the median normalized value of their
//! observations. Observations in the top `r_high` fraction of tiles get draw
//! weight `1 + p_high`, those in the bottom `r_low` fraction `1 + p_low`,
//! everything else weight 1. Each member then draws `m` observations without
//! replacement by weight-proportional sequential draws and fits its own GP.
//! Member predictions are averaged, and the spread of the member means is
//! added to the averaged variance.

use crate::error::{domain, Error, Result};
use crate::gp::{self, FitOptions, GpModel, KernelParams, Prediction};
use crate::math;
use crate::stats::median_in_place;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SamplingWeights {
    pub p_high: f64,
    pub p_low: f64,
    pub r_high: f64,
    pub r_low: f64,
}

impl Default for SamplingWeights {
    fn default() -> Self {
        SamplingWeights { p_high: 0.3, p_low: 0.3, r_high: 0.2, r_low: 0.2 }
    }
}

impl SamplingWeights {
    pub const UNIFORM: SamplingWeights = SamplingWeights { p_high: 0.0, p_low: 0.0, r_high: 0.0, r_low: 0.0 };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_high", self.p_high), ("p_low", self.p_low), ("r_high", self.r_high), ("r_low", self.r_low)] {
            if !(0.0..1.0).contains(&v) {
                return Err(domain!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.r_high + self.r_low > 1.0 {
            return Err(domain!("r_high + r_low must not exceed 1"));
        }
        Ok(())
    }
}

/// How a sampling probability `p` becomes a per-draw weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WeightRule {
    /// Weight `1 + p`: `p = 0.3` makes a draw 1.3 times as likely.
    #[default]
    OnePlusP,
    /// Weight `1 + p / 0.6`: `p = 0.3` makes a draw 1.5 times as likely.
    StrictOdds,
}

impl WeightRule {
    pub fn weight(self, p: f64) -> f64 {
        match self {
            WeightRule::OnePlusP => 1.0 + p,
            WeightRule::StrictOdds => 1.0 + p / 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EnsembleConfig {
    /// Number of bagged models B.
    pub models: usize,
    /// Subsample size m.
    pub subsample: usize,
    pub weights: SamplingWeights,
    pub weight_rule: WeightRule,
    pub seed: u64,
    /// The fit fails if more than this fraction of members fail.
    pub max_failure_fraction: f64,
    pub fit: FitOptions,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            models: 100,
            subsample: 2000,
            weights: SamplingWeights::default(),
            weight_rule: WeightRule::OnePlusP,
            seed: 0,
            max_failure_fraction: 0.1,
            fit: FitOptions::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.weights.validate()?;
        if self.models == 0 {
            return Err(domain!("ensemble needs at least one model"));
        }
        if self.subsample < 2 || self.subsample > n {
            return Err(domain!("subsample size {} must lie in [2, {n}]", self.subsample));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(domain!("max_failure_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Training observations in kernel coordinates with their tile indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub coords: Vec<[f64; 2]>,
    pub y: Vec<f64>,
    pub tiles: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.coords.len() != self.y.len() || self.tiles.len() != self.y.len() {
            return Err(domain!("training set columns have different lengths"));
        }
        if self.is_empty() {
            return Err(domain!("training set is empty"));
        }
        Ok(())
    }
}

/// Sampling class of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleClass {
    Low,
    Middle,
    High,
}

/// Classifies every observation by the rank of its tile's median `y`.
/// Ties in the median are broken by tile index.
pub fn sample_classes(set: &TrainingSet, weights: &SamplingWeights) -> Vec<SampleClass> {
    let mut by_tile: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&t, &y) in set.tiles.iter().zip(&set.y) {
        by_tile.entry(t).or_default().push(y);
    }
    let mut ranked: Vec<(f64, usize)> = by_tile
        .into_iter()
        .map(|(t, mut ys)| (median_in_place(&mut ys).expect("non-empty tile"), t))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n_tiles = ranked.len() as f64;
    let n_low = math::floor(weights.r_low * n_tiles + 1e-9) as usize;
    let n_high = math::floor(weights.r_high * n_tiles + 1e-9) as usize;
    let mut class_of: BTreeMap<usize, SampleClass> = BTreeMap::new();
    for (rank, &(_, t)) in ranked.iter().enumerate() {
        let c = if rank < n_low {
            SampleClass::Low
        } else if rank >= ranked.len() - n_high {
            SampleClass::High
        } else {
            SampleClass::Middle
        };
        class_of.insert(t, c);
    }
    set.tiles.iter().map(|t| class_of[t]).collect()
}

/// Draws `m` distinct observation indices, each draw choosing among the
/// remaining observations with probability proportional to their class
/// weight. Returned indices are sorted.
pub fn biased_subsample<R: Rng + ?Sized>(
    classes: &[SampleClass],
    weights: &SamplingWeights,
    rule: WeightRule,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m > classes.len() {
        return Err(domain!("cannot draw {m} observations from {}", classes.len()));
    }
    let class_weight = [rule.weight(weights.p_low), 1.0, rule.weight(weights.p_high)];
    let mut pools: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, c) in classes.iter().enumerate() {
        pools[*c as usize].push(i);
    }
    let mut taken = [0usize; 3];
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mass: [f64; 3] = core::array::from_fn(|c| class_weight[c] * (pools[c].len() - taken[c]) as f64);
        let total = mass[0] + mass[1] + mass[2];
        let mut u = rng.random::<f64>() * total;
        let mut c = 0;
        while c < 2 && (u >= mass[c] || mass[c] == 0.0) {
            u -= mass[c];
            c += 1;
        }
        // Guard against rounding landing on an exhausted pool.
        while pools[c].len() == taken[c] {
            c = (c + 2) % 3;
        }
        let pool = &mut pools[c];
        let k = rng.random_range(taken[c]..pool.len());
        pool.swap(taken[c], k);
        out.push(pool[taken[c]]);
        taken[c] += 1;
    }
    out.sort_unstable();
    Ok(out)
}

/// Deterministic RNG for member `b` of an ensemble seeded with `seed`.
pub fn member_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64 + 1);
    rng
}

/// FNV-1a over the subsample indices, for run metadata.
pub fn subsample_hash(indices: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in indices {
        for byte in (i as u64).to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MemberSummary {
    pub index: usize,
    pub subsample_hash: u64,
    pub params: Option<KernelParams>,
    pub log_marginal_likelihood: Option<f64>,
    pub diagnostics: Option<gp::FitDiagnostics>,
    pub error: Option<alloc::string::String>,
}

/// Outcome of fitting one member.
#[derive(Debug, Clone)]
pub struct MemberFit {
    pub summary: MemberSummary,
    pub model: Option<GpModel>,
}

/// Draws member `b`'s subsample and fits its GP.
pub fn fit_member(set: &TrainingSet, classes: &[SampleClass], cfg: &EnsembleConfig, b: usize) -> Result<MemberFit> {
    let mut rng = member_rng(cfg.seed, b);
    let idx = biased_subsample(classes, &cfg.weights, cfg.weight_rule, cfg.subsample, &mut rng)?;
    let x: Vec<[f64; 2]> = idx.iter().map(|&i| set.coords[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| set.y[i]).collect();
    let init = gp::initial_params(&x, &y, cfg.fit.norm);
    let mut summary = MemberSummary {
        index: b,
        subsample_hash: subsample_hash(&idx),
        params: None,
        log_marginal_likelihood: None,
        diagnostics: None,
        error: None,
    };
    match gp::fit(&x, &y, &init, &cfg.fit) {
        Ok(model) => {
            summary.params = Some(model.params());
            summary.log_marginal_likelihood = Some(model.log_marginal_likelihood());
            summary.diagnostics = Some(model.diagnostics());
            Ok(MemberFit { summary, model: Some(model) })
        }
        Err(e) => {
            log::warn!("ensemble member {b} failed: {e}");
            summary.error = Some(alloc::format!("{e}"));
            Ok(MemberFit { summary, model: None })
        }
    }
}

/// A bag of fitted GPs.
#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<GpModel>,
    summaries: Vec<MemberSummary>,
}

impl Ensemble {
    /// Assembles member outcomes (in any order), enforcing the failure budget.
    pub fn from_fits(mut fits: Vec<MemberFit>, max_failure_fraction: f64) -> Result<Self> {
        fits.sort_by_key(|f| f.summary.index);
        let total = fits.len();
        let failed = fits.iter().filter(|f| f.model.is_none()).count();
        if total == 0 || failed == total || failed as f64 > max_failure_fraction * total as f64 {
            return Err(Error::Numerical(alloc::format!("{failed} of {total} ensemble members failed")));
        }
        let summaries = fits.iter().map(|f| f.summary.clone()).collect();
        let members = fits.into_iter().filter_map(|f| f.model).collect();
        Ok(Ensemble { members, summaries })
    }

    pub fn members(&self) -> &[GpModel] {
        &self.members
    }

    pub fn summaries(&self) -> &[MemberSummary] {
        &self.summaries
    }

    pub fn predict(&self, q: &[f64; 2]) -> EnsemblePrediction {
        let preds: Vec<Prediction> = self.members.iter().map(|m| m.predict(q)).collect();
        combine(&preds).expect("ensemble has members")
    }
}

/// Fits all members sequentially.
pub fn fit_ensemble(set: &TrainingSet, cfg: &EnsembleConfig) -> Result<Ensemble> {
    set.validate()?;
    cfg.validate(set.len())?;
    let classes = sample_classes(set, &cfg.weights);
    let fits = (0..cfg.models).map(|b| fit_member(set, &classes, cfg, b)).collect::<Result<Vec<_>>>()?;
    Ensemble::from_fits(fits, cfg.max_failure_fraction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub mean: f64,
    pub variance: f64,
    pub member_means: Vec<f64>,
}

/// Bagged mean and variance: `µ = mean(µ_b)`, `σ² = mean(σ_b²) + mean((µ_b - µ)²)`.
pub fn combine(preds: &[Prediction]) -> Result<EnsemblePrediction> {
    if preds.is_empty() {
        return Err(domain!("no member predictions to combine"));
    }
    let b = preds.len() as f64;
    let mean = preds.iter().map(|p| p.mean).sum::<f64>() / b;
    let within = preds.iter().map(|p| p.variance).sum::<f64>() / b;
    let spread = preds.iter().map(|p| (p.mean - mean) * (p.mean - mean)).sum::<f64>() / b;
    Ok(EnsemblePrediction { mean, variance: within + spread, member_means: preds.iter().map(|p| p.mean).collect() })
}
