//! The pipeline configuration file (TOML).
//!
//! Every table is optional; omitted keys take the standard method
//! settings. Relative paths are resolved against the config file's directory.

use crate::error::{Error, Result};
use crate::timefmt::parse_timestamp;
use hotspot_core::ensemble::{EnsembleConfig, SamplingWeights, WeightRule};
use hotspot_core::geo::{BoundingBox, CoordinateMode};
use hotspot_core::gp::FitOptions;
use hotspot_core::ingest::CleaningConfig;
use hotspot_core::normalize::NormalizationConfig;
use hotspot_core::simulate::{CampaignConfig, GammaParameterization, SimNoiseConfig};
use hotspot_core::time::Timestamp;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed. Required; every random stream derives from it.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub columns: ColumnMap,
    pub cleaning: CleaningSection,
    pub normalization: NormalizationConfig,
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
    pub hotspot: HotspotSection,
    pub simulation: SimulationSection,
    pub evaluation: EvaluationSection,
    pub diagnostics: DiagnosticsSection,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw sensor CSV files.
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Ground-truth raster CSV for simulation and evaluation.
    pub raster: Option<PathBuf>,
    pub road_nodes: Option<PathBuf>,
    pub road_edges: Option<PathBuf>,
    /// Hourly reference-station series for the simulator.
    pub station: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { inputs: Vec::new(), output_dir: PathBuf::from("out"), raster: None, road_nodes: None, road_edges: None, station: None }
    }
}

/// Accepted header names per field, compared case-insensitively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub device_id: Vec<String>,
    /// Single date-time column.
    pub timestamp: Vec<String>,
    /// Separate date and time columns, used when no timestamp column exists.
    pub date: Vec<String>,
    pub time: Vec<String>,
    pub lat: Vec<String>,
    pub lon: Vec<String>,
    pub pm25: Vec<String>,
    pub speed: Vec<String>,
    pub rh: Vec<String>,
    pub temp: Vec<String>,
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            device_id: names(&["device_id", "device", "sensor_id", "sensor", "id"]),
            timestamp: names(&["timestamp", "datetime", "date_time", "time_utc"]),
            date: names(&["date"]),
            time: names(&["time"]),
            lat: names(&["lat", "latitude"]),
            lon: names(&["lon", "lng", "long", "longitude"]),
            pm25: names(&["pm25", "pm2_5", "pm2.5", "pm_25"]),
            speed: names(&["speed", "speed_mps"]),
            rh: names(&["rh", "humidity", "relative_humidity"]),
            temp: names(&["temp", "temperature"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBoxSection {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BBoxSection {
    pub fn to_bbox(self) -> Result<BoundingBox> {
        BoundingBox::new(self.min_lat, self.max_lat, self.min_lon, self.max_lon).map_err(|e| Error::Config(e.to_string()))
    }
}

impl From<BoundingBox> for BBoxSection {
    fn from(b: BoundingBox) -> Self {
        BBoxSection { min_lat: b.min_lat, max_lat: b.max_lat, min_lon: b.min_lon, max_lon: b.max_lon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningSection {
    pub bbox: Option<BBoxSection>,
    /// Inclusive start, as an ISO-8601 date or date-time (UTC).
    pub date_start: Option<String>,
    /// Exclusive end.
    pub date_end: Option<String>,
    pub pm25_max: f64,
    pub drop_zero_speed: bool,
}

impl Default for CleaningSection {
    fn default() -> Self {
        let d = CleaningConfig::default();
        CleaningSection { bbox: None, date_start: None, date_end: None, pm25_max: d.pm25_max, drop_zero_speed: d.drop_zero_speed }
    }
}

fn timestamp_field(name: &str, v: &Option<String>) -> Result<Option<Timestamp>> {
    v.as_deref()
        .map(|s| parse_timestamp(s).ok_or_else(|| Error::Config(format!("{name}: cannot parse {s:?} as a date"))))
        .transpose()
}

impl CleaningSection {
    pub fn to_core(&self) -> Result<CleaningConfig> {
        let start = timestamp_field("cleaning.date_start", &self.date_start)?;
        let end = timestamp_field("cleaning.date_end", &self.date_end)?;
        let date_range = match (start, end) {
            (None, None) => None,
            (s, e) => Some((s.unwrap_or(Timestamp::from_millis(i64::MIN)), e.unwrap_or(Timestamp::from_millis(i64::MAX)))),
        };
        let cfg = CleaningConfig {
            bbox: self.bbox.map(BBoxSection::to_bbox).transpose()?,
            date_range,
            pm25_max: self.pm25_max,
            drop_zero_speed: self.drop_zero_speed,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Tile edge in meters.
    pub tile_size: f64,
    /// Scoring extent; falls back to the cleaning box, then to the data extent.
    pub bbox: Option<BBoxSection>,
    pub coordinates: CoordinateMode,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { tile_size: 200.0, bbox: None, coordinates: CoordinateMode::Meters }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub models: usize,
    pub subsample: usize,
    pub weights: SamplingWeights,
    pub weight_rule: WeightRule,
    pub max_failure_fraction: f64,
    pub fit: FitOptions,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        EnsembleSection {
            models: d.models,
            subsample: d.subsample,
            weights: d.weights,
            weight_rule: d.weight_rule,
            max_failure_fraction: d.max_failure_fraction,
            fit: d.fit,
        }
    }
}

impl EnsembleSection {
    pub fn to_core(&self, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            models: self.models,
            subsample: self.subsample,
            weights: self.weights,
            weight_rule: self.weight_rule,
            seed,
            max_failure_fraction: self.max_failure_fraction,
            fit: self.fit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HotspotSection {
    pub p_crit: f64,
}

impl Default for HotspotSection {
    fn default() -> Self {
        HotspotSection { p_crit: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_pairs: usize,
    pub spacing_m: f64,
    pub period_start: String,
    /// Exclusive.
    pub period_end: String,
    pub max_retries: usize,
    pub spike_prob: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub gamma_parameterization: GammaParameterization,
    pub gauss_sd: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let c = CampaignConfig::default();
        let n = SimNoiseConfig::default();
        SimulationSection {
            n_pairs: c.n_pairs,
            spacing_m: c.spacing_m,
            period_start: "2019-09-01".into(),
            period_end: "2019-10-01".into(),
            max_retries: c.max_retries,
            spike_prob: n.spike_prob,
            gamma_shape: n.gamma_shape,
            gamma_scale: n.gamma_scale,
            gamma_parameterization: n.gamma_parameterization,
            gauss_sd: n.gauss_sd,
        }
    }
}

impl SimulationSection {
    pub fn campaign(&self, seed: u64) -> Result<CampaignConfig> {
        let start = timestamp_field("simulation.period_start", &Some(self.period_start.clone()))?.expect("present");
        let end = timestamp_field("simulation.period_end", &Some(self.period_end.clone()))?.expect("present");
        if start >= end {
            return Err(Error::Config("simulation period must be non-empty".into()));
        }
        if !(self.spacing_m > 0.0) {
            return Err(Error::Config("simulation.spacing_m must be positive".into()));
        }
        Ok(CampaignConfig {
            n_pairs: self.n_pairs,
            spacing_m: self.spacing_m,
            period_start: start,
            period_end: end,
            max_retries: self.max_retries,
            seed,
        })
    }

    pub fn noise(&self, seed: u64) -> Result<SimNoiseConfig> {
        let n = SimNoiseConfig {
            spike_prob: self.spike_prob,
            gamma_shape: self.gamma_shape,
            gamma_scale: self.gamma_scale,
            gamma_parameterization: self.gamma_parameterization,
            gauss_sd: self.gauss_sd,
            seed,
        };
        n.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub test_days: usize,
    /// Measurement-count thresholds for the filtered rank correlation.
    pub count_thresholds: Vec<i64>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { test_days: 6, count_thresholds: vec![-1, 0, 10, 25, 50, 100, 250, 500] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Local time offset for time-of-day statistics, hours east of UTC.
    pub utc_offset_hours: f64,
    pub bucket_minutes: u32,
    pub by_weekday: bool,
    /// Exceedance threshold in µg/m³.
    pub threshold: f64,
    /// Window lengths (minutes) compared by `window-sweep`.
    pub sweep_windows: Vec<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            utc_offset_hours: 0.0,
            bucket_minutes: 15,
            by_weekday: false,
            threshold: 15.0,
            sweep_windows: vec![1.0, 5.0, 15.0, 30.0, 60.0],
        }
    }
}

impl DiagnosticsSection {
    pub fn utc_offset_seconds(&self) -> i64 {
        (self.utc_offset_hours * 3600.0).round() as i64
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.base_dir = Some(base.to_path_buf());
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        paths.inputs.iter_mut().for_each(fix);
        fix(&mut paths.output_dir);
        for p in [&mut paths.raster, &mut paths.road_nodes, &mut paths.road_edges, &mut paths.station].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required (set `seed` or pass --seed)".into()))
    }

    /// Independent seed for one named random stream.
    pub fn derived_seed(&self, label: &str) -> Result<u64> {
        let mut h = Sha256::new();
        h.update(self.seed()?.to_le_bytes());
        h.update(label.as_bytes());
        let d = h.finalize();
        Ok(u64::from_le_bytes(d[..8].try_into().expect("32-byte digest")))
    }

    /// Checks values and that referenced input files exist.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.cleaning.to_core()?;
        self.normalization.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.grid.tile_size > 0.0 && self.grid.tile_size.is_finite()) {
            return Err(Error::Config("grid.tile_size must be positive".into()));
        }
        if let Some(b) = self.grid.bbox {
            b.to_bbox()?;
        }
        let e = &self.ensemble;
        e.weights.validate().map_err(|e| Error::Config(e.to_string()))?;
        if e.models == 0 || e.subsample < 2 {
            return Err(Error::Config("ensemble needs models >= 1 and subsample >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.hotspot.p_crit) {
            return Err(Error::Config("hotspot.p_crit must lie in [0, 1)".into()));
        }
        self.simulation.campaign(0)?;
        self.simulation.noise(0)?;
        let d = &self.diagnostics;
        if d.bucket_minutes == 0 || 1440 % d.bucket_minutes != 0 {
            return Err(Error::Config("diagnostics.bucket_minutes must divide a day".into()));
        }
        let p = &self.paths;
        for f in p.inputs.iter().chain([&p.raster, &p.road_nodes, &p.road_edges, &p.station].into_iter().flatten()) {
            if !f.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", f.display())));
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::Config(format!("paths.{name} is not set")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = PipelineConfig::from_toml("seed = 7\n[ensemble]\nmodels = 10\n[ensemble.fit]\nrestarts = 1\n").unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.ensemble.models, 10);
        assert_eq!(cfg.ensemble.subsample, 2000);
        assert_eq!(cfg.ensemble.fit.restarts, 1);
        assert_eq!(cfg.ensemble.fit.max_iter, 200);
        assert_eq!(cfg.normalization.window_minutes, 15.0);
        assert_eq!(cfg.grid.tile_size, 200.0);
        assert_eq!(cfg.hotspot.p_crit, 0.95);
        assert_eq!(cfg.evaluation.test_days, 6);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(PipelineConfig::from_toml("seed = 1\n[grid]\ntile_sise = 3\n").is_err());
        assert!(PipelineConfig::default().validate().is_err());
        let cfg = PipelineConfig::from_toml("seed = 1\n[cleaning]\ndate_start = \"2021-09-20\"\ndate_end = \"2021-09-01\"\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = PipelineConfig::from_toml("seed = 1\n[paths]\nraster = \"/nonexistent/raster.csv\"\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn derived_seeds_differ() {
        let cfg = PipelineConfig { seed: Some(3), ..Default::default() };
        assert_ne!(cfg.derived_seed("a").unwrap(), cfg.derived_seed("b").unwrap());
        assert_eq!(cfg.derived_seed("a").unwrap(), cfg.derived_seed("a").unwrap());
    }
}
