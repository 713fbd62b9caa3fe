//! Synthetic inputs for the simulator: a smooth raster with two hotspots, a
//! street grid through the tile centroids and a diurnal station series.

use crate::error::Result;
use crate::io;
use hotspot_core::geo::{unproject, BoundingBox, GeoPoint, LocalXY, TileGrid};
use hotspot_core::simulate::{GroundTruthRaster, RoadGraph};
use hotspot_core::time::Timestamp;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    /// South-west corner of the raster.
    pub south_west: GeoPoint,
    pub rows: usize,
    pub cols: usize,
    pub tile_size: f64,
    /// Height of the morning station peak in µg/m³; the evening peak is 0.7 of it.
    pub peak: f64,
    /// Station series covers `[start, end)` hourly.
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            south_west: GeoPoint { lat: -1.96, lon: 30.05 },
            rows: 20,
            cols: 20,
            tile_size: 30.0,
            peak: 14.0,
            start: Timestamp::from_seconds(1_567_296_000),
            end: Timestamp::from_seconds(1_569_888_000),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub raster: GroundTruthRaster,
    pub graph: RoadGraph,
    pub station: Vec<(Timestamp, f64)>,
}

fn bump(x: f64, y: f64, cx: f64, cy: f64, sd: f64) -> f64 {
    (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sd * sd)).exp()
}

/// Ground truth at local coordinates `(x, y)` in a `w × h` meter box.
fn surface(x: f64, y: f64, w: f64, h: f64) -> f64 {
    20.0 + 8.0 * x / w + 4.0 * y / h
        + 30.0 * bump(x, y, 0.3 * w, 0.65 * h, 0.12 * w)
        + 22.0 * bump(x, y, 0.75 * w, 0.25 * h, 0.09 * w)
}

/// Hourly station readings with a morning and an evening peak.
fn station_value(t: Timestamp, peak: f64) -> f64 {
    let h = t.millis_of_day(0) as f64 / 3.6e6;
    let weekend = t.weekday(0) >= 5;
    let peaks = peak * ((-(h - 7.5).powi(2) / 4.0).exp() + 0.7 * (-(h - 19.0).powi(2) / 6.0).exp());
    let base = 18.0 + 3.0 * (2.0 * PI * h / 24.0).cos();
    base + if weekend { 0.6 * peaks } else { peaks }
}

pub fn build(params: &ScenarioParams) -> Result<Scenario> {
    let (w, h) = (params.cols as f64 * params.tile_size, params.rows as f64 * params.tile_size);
    let sw = params.south_west;
    let ne = unproject(LocalXY { x: w, y: h }, sw);
    let bbox = BoundingBox::new(sw.lat, ne.lat, sw.lon, ne.lon)?;
    let grid = TileGrid::new(bbox, params.tile_size)?;
    let half = params.tile_size / 2.0;
    let values = (0..grid.len())
        .map(|j| {
            let (r, c) = grid.row_col(j)?;
            Ok(surface(c as f64 * params.tile_size + half, r as f64 * params.tile_size + half, w, h))
        })
        .collect::<Result<Vec<f64>>>()?;
    let raster = GroundTruthRaster::new(grid, values)?;
    let first = unproject(LocalXY { x: half, y: half }, sw);
    let graph = RoadGraph::grid(first, params.rows, params.cols, params.tile_size)?;
    let mut station = Vec::new();
    let mut t = params.start;
    while t < params.end {
        station.push((t, station_value(t, params.peak)));
        t = t.add_seconds(3_600);
    }
    Ok(Scenario { raster, graph, station })
}

#[derive(Debug, Clone)]
pub struct ScenarioFiles {
    pub raster: PathBuf,
    pub road_nodes: PathBuf,
    pub road_edges: PathBuf,
    pub station: PathBuf,
}

pub fn write(dir: &Path, scenario: &Scenario) -> Result<ScenarioFiles> {
    let files = ScenarioFiles {
        raster: dir.join("raster.csv"),
        road_nodes: dir.join("road_nodes.csv"),
        road_edges: dir.join("road_edges.csv"),
        station: dir.join("station.csv"),
    };
    io::write_raster(&files.raster, &scenario.raster)?;
    io::write_road_graph(&files.road_nodes, &files.road_edges, &scenario.graph)?;
    io::write_station_series(&files.station, &scenario.station)?;
    Ok(files)
}
