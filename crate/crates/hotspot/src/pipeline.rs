//! Pipeline stages. Each reads its inputs from files, writes its outputs and
//! metadata into the output directory and returns a summary.

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::metadata::{check_upstream, RunMetadata, Timings};
use hotspot_core::diagnostics::{diurnal_profile, exceedance_rate, summary};
use hotspot_core::ensemble::{fit_member, sample_classes, Ensemble, EnsembleConfig, TrainingSet};
use hotspot_core::evaluate::{
    brier, exceedance_labels, isotonic_fit, reliability, spearman, spearman_filtered, split_days, DaySplit,
    IsotonicModel, Reliability,
};
use hotspot_core::geo::{BoundingBox, CoordinateFrame, GeoPoint, TileGrid};
use hotspot_core::hotspot::{tile_score, HotspotGrid};
use hotspot_core::ingest::{clean, CleaningStats, RawRecord};
use hotspot_core::normalize::{normalize, rolling_baseline, window_smoothness, NormalizedObservation};
use hotspot_core::simulate::{hourly_multipliers, simulate_campaign, GroundTruthRaster};
use hotspot_core::stats::median;
use hotspot_core::time::Timestamp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;

pub const CLEANED: &str = "cleaned.csv";
pub const NORMALIZED: &str = "normalized.csv";
pub const HOTSPOTS: &str = "hotspots.csv";
pub const HOTSPOTS_GEOJSON: &str = "hotspots.geojson";
pub const SIMULATED: &str = "simulated.csv";

/// Options that are not part of the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Proceed when upstream metadata is missing or was produced under a
    /// different config.
    pub allow_stale: bool,
}

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub stats: CleaningStats,
    pub parse_issues: usize,
    pub records: Vec<RawRecord>,
}

/// Parses every input file, applies the cleaning rules and writes the
/// cleaned records, drop counts, parse issues and raw-value diagnostics.
pub fn ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    cfg.validate()?;
    let mut timings = Timings::start("ingest");
    let mut meta = RunMetadata::new("ingest", cfg, cfg.ingest_hash(), None)?;
    if cfg.paths.inputs.is_empty() {
        return Err(Error::Config("paths.inputs lists no files".into()));
    }
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for path in &cfg.paths.inputs {
        let parsed = io::read_records(path, &cfg.columns)?;
        meta.record_input(path)?;
        records.extend(parsed.records);
        issues.extend(parsed.issues);
    }
    timings.mark("parse");
    if !issues.is_empty() {
        meta.warn(format!("{} malformed rows skipped (see ingest.issues.csv)", issues.len()));
    }
    let (cleaned, stats) = clean(records, &cfg.cleaning.to_core()?);
    timings.mark("clean");
    if cleaned.is_empty() {
        meta.warn("no records survived cleaning".into());
    }

    let cleaned_path = out(cfg, CLEANED);
    io::write_records(&cleaned_path, &cleaned)?;
    let stats_path = out(cfg, "ingest.stats.csv");
    let mut entries: Vec<(&str, usize)> = stats.entries().to_vec();
    entries.push(("parse_issues", issues.len()));
    io::write_key_counts(&stats_path, &entries)?;
    let issues_path = out(cfg, "ingest.issues.csv");
    let rows: Vec<Vec<String>> = issues.iter().map(|i| vec![i.file.clone(), i.line.to_string(), i.message.clone()]).collect();
    io::write_table_csv(&issues_path, &["file", "line", "message"], &rows)?;

    let d = &cfg.diagnostics;
    let pm: Vec<f64> = cleaned.iter().filter_map(|r| r.pm25).collect();
    let times: Vec<Timestamp> = cleaned.iter().map(|r| r.timestamp).collect();
    let profile = diurnal_profile(&times, &pm, d.utc_offset_seconds(), d.by_weekday, d.bucket_minutes)?;
    let profile_path = out(cfg, "diurnal.csv");
    io::write_profile_csv(&profile_path, &profile)?;
    let overall = summary(&pm);
    meta.details = json!({
        "cleaning": stats,
        "parse_issues": issues.len(),
        "pm25_mean": (overall.count > 0).then_some(overall.mean),
        "pm25_sd": (overall.count > 0).then_some(overall.sd),
        "exceedance_threshold": d.threshold,
        "exceedance_rate": exceedance_rate(&pm, d.threshold).ok(),
    });
    timings.mark("write");
    for p in [&cleaned_path, &stats_path, &issues_path, &profile_path] {
        meta.record_output(p)?;
    }
    meta.write(&cfg.paths.output_dir)?;
    timings.write(&cfg.paths.output_dir)?;
    Ok(IngestSummary { stats, parse_issues: issues.len(), records: cleaned })
}

fn read_cleaned(cfg: &PipelineConfig, meta: &mut RunMetadata) -> Result<Vec<RawRecord>> {
    let path = out(cfg, CLEANED);
    let parsed = io::read_records(&path, &crate::config::ColumnMap::default())?;
    if let Some(first) = parsed.issues.first() {
        return Err(Error::Data(format!("{}: line {}: {}", path.display(), first.line, first.message)));
    }
    meta.record_input(&path)?;
    Ok(parsed.records)
}

#[derive(Debug, Clone)]
pub struct NormalizeSummary {
    pub observations: Vec<NormalizedObservation>,
    pub median_y: Option<f64>,
}

/// Subtracts the rolling-median baseline from the cleaned records.
pub fn normalize_stage(cfg: &PipelineConfig, opts: RunOptions) -> Result<NormalizeSummary> {
    cfg.validate()?;
    let dir = &cfg.paths.output_dir;
    let mut timings = Timings::start("normalize");
    let mut meta = RunMetadata::new("normalize", cfg, cfg.normalize_hash(), Some(cfg.ingest_hash()))?;
    check_upstream(dir, "ingest", &cfg.ingest_hash(), opts.allow_stale, &mut meta)?;
    let records = read_cleaned(cfg, &mut meta)?;
    timings.mark("read");
    if records.is_empty() {
        meta.warn("no cleaned records to normalize".into());
    }
    let n = normalize(records, &cfg.normalization)?;
    if !n.input_sorted {
        meta.warn("input was not in time order; sorted before normalizing".into());
    }
    timings.mark("normalize");
    let path = out(cfg, NORMALIZED);
    io::write_normalized(&path, &n.observations)?;
    meta.median_y = n.median_y;
    meta.details = json!({"observations": n.observations.len(), "window_minutes": cfg.normalization.window_minutes});
    meta.record_output(&path)?;
    meta.write(dir)?;
    timings.mark("write");
    timings.write(dir)?;
    Ok(NormalizeSummary { observations: n.observations, median_y: n.median_y })
}

/// Roughness of the diurnal profile of `y` for each candidate window.
pub fn window_sweep(cfg: &PipelineConfig, opts: RunOptions) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let dir = &cfg.paths.output_dir;
    let mut timings = Timings::start("window-sweep");
    let mut meta = RunMetadata::new("window-sweep", cfg, cfg.window_sweep_hash(), Some(cfg.ingest_hash()))?;
    check_upstream(dir, "ingest", &cfg.ingest_hash(), opts.allow_stale, &mut meta)?;
    let records = read_cleaned(cfg, &mut meta)?;
    let times: Vec<Timestamp> = records.iter().map(|r| r.timestamp).collect();
    let values: Vec<f64> = records.iter().map(|r| r.pm25.unwrap_or(f64::NAN)).collect();
    let d = &cfg.diagnostics;
    let table = if records.is_empty() {
        meta.warn("no cleaned records; sweep table is empty".into());
        Vec::new()
    } else {
        window_smoothness(&times, &values, &d.sweep_windows, d.bucket_minutes, d.utc_offset_seconds())?
    };
    timings.mark("sweep");
    let path = out(cfg, "window_sweep.csv");
    let rows: Vec<Vec<String>> = table.iter().map(|(w, s)| vec![format!("{w}"), format!("{s}")]).collect();
    io::write_table_csv(&path, &["window_minutes", "roughness"], &rows)?;
    meta.record_output(&path)?;
    meta.write(dir)?;
    timings.write(dir)?;
    Ok(table)
}

/// Training set on `grid`; points outside it are skipped and counted.
pub fn training_set(points: &[GeoPoint], y: &[f64], grid: &TileGrid, frame: &CoordinateFrame) -> (TrainingSet, usize) {
    let mut set = TrainingSet::default();
    let mut outside = 0;
    for (p, &v) in points.iter().zip(y) {
        match grid.tile_of(*p) {
            Some(j) => {
                set.coords.push(frame.coords(*p));
                set.y.push(v);
                set.tiles.push(j);
            }
            None => outside += 1,
        }
    }
    (set, outside)
}

/// Fits ensemble members in parallel on the current rayon pool. Output is
/// identical to the sequential fit.
pub fn fit_ensemble_parallel(set: &TrainingSet, cfg: &EnsembleConfig) -> Result<Ensemble> {
    if set.is_empty() {
        return Err(Error::Data("no training observations inside the grid".into()));
    }
    cfg.validate(set.len())?;
    let classes = sample_classes(set, &cfg.weights);
    let fits = (0..cfg.models)
        .into_par_iter()
        .map(|b| fit_member(set, &classes, cfg, b))
        .collect::<hotspot_core::Result<Vec<_>>>()?;
    Ok(Ensemble::from_fits(fits, cfg.max_failure_fraction)?)
}

/// Scores every tile centroid of `grid` in parallel.
pub fn score_tiles(
    ensemble: &Ensemble,
    grid: &TileGrid,
    frame: &CoordinateFrame,
    median_y: f64,
    n_measurements: Vec<usize>,
) -> Result<HotspotGrid> {
    let centroids = (0..grid.len()).map(|j| grid.centroid(j)).collect::<hotspot_core::Result<Vec<_>>>()?;
    let scores = centroids
        .par_iter()
        .enumerate()
        .map(|(j, c)| {
            let p = ensemble.predict(&frame.coords(*c));
            tile_score(j, p.mean, p.variance, median_y)
        })
        .collect();
    Ok(HotspotGrid { grid: grid.clone(), scores, n_measurements })
}

fn tile_counts(set: &TrainingSet, n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    set.tiles.iter().for_each(|&j| counts[j] += 1);
    counts
}

fn data_extent(points: &[GeoPoint]) -> Result<BoundingBox> {
    let fold = |f: fn(&GeoPoint) -> f64| {
        points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (min_lat, max_lat) = fold(|p| p.lat);
    let (min_lon, max_lon) = fold(|p| p.lon);
    BoundingBox::new(min_lat, max_lat, min_lon, max_lon)
        .map_err(|e| Error::Data(format!("cannot derive a grid from the data extent: {e}")))
}

/// Grid from the config (grid box, else cleaning box, else data extent).
pub fn resolve_grid(cfg: &PipelineConfig, points: &[GeoPoint]) -> Result<TileGrid> {
    let bbox = match cfg.grid.bbox.or(cfg.cleaning.bbox) {
        Some(b) => b.to_bbox()?,
        None => data_extent(points)?,
    };
    TileGrid::new(bbox, cfg.grid.tile_size).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct FitScoreSummary {
    pub hotspots: HotspotGrid,
    pub median_y: f64,
    pub ensemble: Ensemble,
}

/// Fits the bagged GP to the normalized readings and scores every tile.
pub fn fit_score(cfg: &PipelineConfig, opts: RunOptions) -> Result<FitScoreSummary> {
    cfg.validate()?;
    let dir = &cfg.paths.output_dir;
    let mut timings = Timings::start("fit-score");
    let mut meta = RunMetadata::new("fit-score", cfg, cfg.fit_score_hash(), Some(cfg.normalize_hash()))?;
    check_upstream(dir, "normalize", &cfg.normalize_hash(), opts.allow_stale, &mut meta)?;
    let norm_path = out(cfg, NORMALIZED);
    let obs = io::read_normalized(&norm_path)?;
    meta.record_input(&norm_path)?;
    timings.mark("read");
    let ys: Vec<f64> = obs.iter().map(|o| o.y).collect();
    let median_y = median(&ys).ok_or_else(|| Error::Data("no normalized observations".into()))?;
    let points: Vec<GeoPoint> = obs.iter().map(|o| o.record.position()).collect();
    let grid = resolve_grid(cfg, &points)?;
    let frame = CoordinateFrame::new(cfg.grid.coordinates, grid.origin);
    let (set, outside) = training_set(&points, &ys, &grid, &frame);
    if outside > 0 {
        meta.warn(format!("{outside} observations fall outside the grid and were not used"));
    }
    let ens_cfg = cfg.ensemble.to_core(cfg.derived_seed("ensemble")?);
    let ensemble = fit_ensemble_parallel(&set, &ens_cfg)?;
    timings.mark("fit");
    let failed = ensemble.summaries().iter().filter(|s| s.error.is_some()).count();
    if failed > 0 {
        meta.warn(format!("{failed} of {} ensemble members failed", ens_cfg.models));
    }
    let hotspots = score_tiles(&ensemble, &grid, &frame, median_y, tile_counts(&set, grid.len()))?;
    timings.mark("score");
    let csv_path = out(cfg, HOTSPOTS);
    let geo_path = out(cfg, HOTSPOTS_GEOJSON);
    io::write_grid_csv(&csv_path, &hotspots, cfg.hotspot.p_crit)?;
    io::write_geojson(&geo_path, &hotspots, cfg.hotspot.p_crit)?;
    meta.median_y = Some(median_y);
    meta.members = ensemble.summaries().to_vec();
    meta.details = json!({
        "training_observations": set.len(),
        "tiles": grid.len(),
        "n_rows": grid.n_rows,
        "n_cols": grid.n_cols,
        "hotspot_tiles": hotspots.scores.iter().flatten().filter(|s| s.h > cfg.hotspot.p_crit).count(),
        "unscored_tiles": hotspots.scores.iter().filter(|s| s.is_none()).count(),
    });
    meta.record_output(&csv_path)?;
    meta.record_output(&geo_path)?;
    meta.write(dir)?;
    timings.mark("write");
    timings.write(dir)?;
    Ok(FitScoreSummary { hotspots, median_y, ensemble })
}

fn raster_fallback_grid(cfg: &PipelineConfig) -> Result<Option<TileGrid>> {
    cfg.grid
        .bbox
        .map(|b| TileGrid::new(b.to_bbox()?, cfg.grid.tile_size).map_err(|e| Error::Config(e.to_string())))
        .transpose()
}

pub fn load_raster(cfg: &PipelineConfig) -> Result<GroundTruthRaster> {
    let path = cfg.require(&cfg.paths.raster, "raster")?;
    io::read_raster(path, raster_fallback_grid(cfg)?.as_ref())
}

/// Generates a synthetic campaign from the raster, road graph and station series.
pub fn simulate(cfg: &PipelineConfig) -> Result<usize> {
    cfg.validate()?;
    let dir = &cfg.paths.output_dir;
    let mut timings = Timings::start("simulate");
    let mut meta = RunMetadata::new("simulate", cfg, cfg.simulate_hash(), None)?;
    let raster = load_raster(cfg)?;
    let graph = io::read_road_graph(
        cfg.require(&cfg.paths.road_nodes, "road_nodes")?,
        cfg.require(&cfg.paths.road_edges, "road_edges")?,
    )?;
    let station = io::read_station_series(cfg.require(&cfg.paths.station, "station")?)?;
    for p in [&cfg.paths.raster, &cfg.paths.road_nodes, &cfg.paths.road_edges, &cfg.paths.station].into_iter().flatten() {
        meta.record_input(p)?;
    }
    let hm = hourly_multipliers(&station)?;
    timings.mark("read");
    let campaign = cfg.simulation.campaign(cfg.derived_seed("routes")?)?;
    let noise = cfg.simulation.noise(cfg.derived_seed("noise")?)?;
    let obs = simulate_campaign(&graph, &raster, &hm, &campaign, &noise)?;
    timings.mark("simulate");
    let path = out(cfg, SIMULATED);
    io::write_sim_observations(&path, &obs, campaign.spacing_m)?;
    meta.details = json!({
        "observations": obs.len(),
        "routes": campaign.n_pairs,
        "spikes": obs.iter().filter(|o| o.spike).count(),
        "station_median": hm.median(),
        "gamma_parameterization": noise.gamma_parameterization,
        "gamma_mean": match noise.gamma_parameterization {
            hotspot_core::simulate::GammaParameterization::ShapeScale => noise.gamma_shape * noise.gamma_scale,
            hotspot_core::simulate::GammaParameterization::ShapeRate => noise.gamma_shape / noise.gamma_scale,
        },
    });
    meta.record_output(&path)?;
    meta.write(dir)?;
    timings.mark("write");
    timings.write(dir)?;
    Ok(obs.len())
}

/// Ground-truth comparison and calibration of one simulated campaign.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub spearman: Option<f64>,
    /// `(threshold, ρ)` over tiles with more than `threshold` training readings.
    pub spearman_filtered: Vec<(i64, Option<f64>)>,
    pub median_y: f64,
    pub test_days: Vec<i64>,
    pub n_train: usize,
    pub n_test: usize,
    pub brier_before: f64,
    pub brier_after: f64,
    pub ece_before: f64,
    pub ece_after: f64,
    #[serde(skip)]
    pub before: Reliability,
    #[serde(skip)]
    pub after: Reliability,
    #[serde(skip)]
    pub calibration: IsotonicModel,
    #[serde(skip)]
    pub hotspots: HotspotGrid,
    #[serde(skip)]
    pub ensemble: Ensemble,
}

/// Normalizes the whole campaign, fits on the training days, and scores the
/// held-out days against labels from the noise-free values.
///
/// Labels are `noise_free_raw - baseline > median_y`, with the same rolling
/// baseline as the observed values and `median_y` from the training days.
/// The calibration map is fitted on training pairs and assessed on test pairs.
pub fn evaluate_simulation(rows: &[io::SimRow], raster: &GroundTruthRaster, cfg: &PipelineConfig) -> Result<Evaluation> {
    if rows.is_empty() {
        return Err(Error::Data("no simulated observations".into()));
    }
    let times: Vec<Timestamp> = rows.iter().map(|r| r.record.timestamp).collect();
    let raw: Vec<f64> =
        rows.iter().map(|r| r.record.pm25.ok_or_else(|| Error::Data("simulated row without pm25".into()))).collect::<Result<_>>()?;
    let baseline = rolling_baseline(&times, &raw, &cfg.normalization)?;
    let y: Vec<f64> = raw.iter().zip(&baseline).map(|(v, b)| v - b).collect();
    let f: Vec<f64> = rows.iter().zip(&baseline).map(|(r, b)| r.noise_free_raw - b).collect();

    let days: Vec<i64> = times.iter().map(|t| t.day(0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.derived_seed("split")?);
    let split: DaySplit = split_days(&days, cfg.evaluation.test_days, &mut rng)?;
    let is_test: Vec<bool> = days.iter().map(|d| split.is_test(*d)).collect();
    let train: Vec<usize> = (0..rows.len()).filter(|&i| !is_test[i]).collect();
    let test: Vec<usize> = (0..rows.len()).filter(|&i| is_test[i]).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("day split left an empty training or test set".into()));
    }
    let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let median_y = median(&train_y).expect("non-empty");

    let grid = &raster.grid;
    let frame = CoordinateFrame::new(cfg.grid.coordinates, grid.origin);
    let points: Vec<GeoPoint> = train.iter().map(|&i| rows[i].record.position()).collect();
    let (set, _) = training_set(&points, &train_y, grid, &frame);
    let ensemble = fit_ensemble_parallel(&set, &cfg.ensemble.to_core(cfg.derived_seed("ensemble")?))?;
    let counts = tile_counts(&set, grid.len());
    let hotspots = score_tiles(&ensemble, grid, &frame, median_y, counts.clone())?;

    let h_tile: Vec<Option<f64>> = hotspots.h();
    let scored: Vec<usize> = (0..grid.len()).filter(|&j| h_tile[j].is_some()).collect();
    let h: Vec<f64> = scored.iter().map(|&j| h_tile[j].expect("scored")).collect();
    let truth: Vec<f64> = scored.iter().map(|&j| raster.values[j]).collect();
    let n_scored: Vec<usize> = scored.iter().map(|&j| counts[j]).collect();
    let rho = spearman(&h, &truth);
    let rho_t = cfg.evaluation.count_thresholds.iter().map(|&t| (t, spearman_filtered(&h, &truth, &n_scored, t))).collect();

    let labels = exceedance_labels(&f, median_y);
    let tile_of = |i: usize| grid.tile_of(rows[i].record.position());
    let score_of = |i: usize| tile_of(i).and_then(|j| h_tile[j]);
    let train_pairs: Vec<(f64, bool)> = train.iter().filter_map(|&i| Some((score_of(i)?, labels[i]))).collect();
    let (ts, tb): (Vec<f64>, Vec<bool>) = train_pairs.into_iter().unzip();
    let calibration = isotonic_fit(&ts, &tb)?;
    let test_scores: Vec<Option<f64>> = test.iter().map(|&i| score_of(i)).collect();
    let test_labels: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
    let calibrated: Vec<Option<f64>> = test_scores.iter().map(|s| s.map(|s| calibration.apply(s))).collect();
    let before = reliability(&test_scores, &test_labels)?;
    let after = reliability(&calibrated, &test_labels)?;
    let flat = |v: &[Option<f64>]| -> (Vec<f64>, Vec<bool>) {
        v.iter().zip(&test_labels).filter_map(|(s, b)| Some(((*s)?, *b))).unzip()
    };
    let (sb, lb) = flat(&test_scores);
    let (sa, la) = flat(&calibrated);
    Ok(Evaluation {
        spearman: rho,
        spearman_filtered: rho_t,
        median_y,
        test_days: split.test_days.clone(),
        n_train: train.len(),
        n_test: test.len(),
        brier_before: brier(&sb, &lb)?,
        brier_after: brier(&sa, &la)?,
        ece_before: before.ece(),
        ece_after: after.ece(),
        before,
        after,
        calibration,
        hotspots,
        ensemble,
    })
}

/// Evaluates the simulated campaign in the output directory against the raster.
pub fn evaluate(cfg: &PipelineConfig, opts: RunOptions) -> Result<Evaluation> {
    cfg.validate()?;
    let dir = &cfg.paths.output_dir;
    let mut timings = Timings::start("evaluate");
    let mut meta = RunMetadata::new("evaluate", cfg, cfg.evaluate_hash(), Some(cfg.simulate_hash()))?;
    check_upstream(dir, "simulate", &cfg.simulate_hash(), opts.allow_stale, &mut meta)?;
    let raster = load_raster(cfg)?;
    let sim_path = out(cfg, SIMULATED);
    let rows = io::read_sim_observations(&sim_path)?;
    meta.record_input(&sim_path)?;
    timings.mark("read");
    let ev = evaluate_simulation(&rows, &raster, cfg)?;
    timings.mark("evaluate");

    io::write_grid_csv(&out(cfg, "evaluation_hotspots.csv"), &ev.hotspots, cfg.hotspot.p_crit)?;
    io::write_calibration_csv(&out(cfg, "calibration.csv"), &[("before", &ev.before), ("after", &ev.after)])?;
    io::write_isotonic_csv(&out(cfg, "isotonic.csv"), &ev.calibration)?;
    let rows: Vec<Vec<String>> =
        ev.spearman_filtered.iter().map(|(t, r)| vec![t.to_string(), r.map(|r| format!("{r}")).unwrap_or_default()]).collect();
    io::write_table_csv(&out(cfg, "spearman_filtered.csv"), &["threshold", "spearman"], &rows)?;
    io::write_json(&out(cfg, "metrics.json"), &ev)?;
    for name in &stage_outputs("evaluate")[..5] {
        meta.record_output(&out(cfg, name))?;
    }
    meta.median_y = Some(ev.median_y);
    meta.members = ev.ensemble.summaries().to_vec();
    meta.details = serde_json::to_value(&ev).map_err(|e| Error::Data(e.to_string()))?;
    meta.write(dir)?;
    timings.mark("write");
    timings.write(dir)?;
    Ok(ev)
}

/// Paths of the files each stage writes, for callers that compare runs.
pub fn stage_outputs(stage: &str) -> &'static [&'static str] {
    match stage {
        "ingest" => &["cleaned.csv", "ingest.stats.csv", "ingest.issues.csv", "diurnal.csv", "ingest.meta.json"],
        "normalize" => &["normalized.csv", "normalize.meta.json"],
        "window-sweep" => &["window_sweep.csv", "window-sweep.meta.json"],
        "fit-score" => &["hotspots.csv", "hotspots.geojson", "fit-score.meta.json"],
        "simulate" => &["simulated.csv", "simulate.meta.json"],
        "evaluate" => &[
            "evaluation_hotspots.csv",
            "calibration.csv",
            "isotonic.csv",
            "spearman_filtered.csv",
            "metrics.json",
            "evaluate.meta.json",
        ],
        _ => &[],
    }
}
