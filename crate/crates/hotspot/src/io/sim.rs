use super::grid::header_lines;
use super::records::{record_fields, record_header, SchemaColumns};
use super::{csv_reader, csv_writer, finish, fmt_f64, parse_f64, read_grid_header, required_column, find_column};
use crate::error::{Error, Result};
use crate::timefmt::{format_timestamp, parse_timestamp};
use hotspot_core::geo::{GeoPoint, TileGrid};
use hotspot_core::ingest::RawRecord;
use hotspot_core::simulate::{GroundTruthRaster, RoadGraph, SimObservation};
use hotspot_core::time::Timestamp;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

fn data_err(path: &Path, row: &csv::StringRecord, m: impl std::fmt::Display) -> Error {
    Error::Data(format!("{} line {}: {m}", path.display(), line_of(row)))
}

/// Reads a `row,col,pm25` raster. Geometry comes from the file's grid header
/// block, or from `fallback` when the file has none. Every tile must appear
/// exactly once.
pub fn read_raster(path: &Path, fallback: Option<&TileGrid>) -> Result<GroundTruthRaster> {
    let grid = match read_grid_header(path)? {
        Some(h) => h.grid()?,
        None => fallback
            .cloned()
            .ok_or_else(|| Error::Config(format!("{}: raster has no grid header and no grid is configured", path.display())))?,
    };
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let (ri, ci, vi) = (
        required_column(&headers, "row", path)?,
        required_column(&headers, "col", path)?,
        required_column(&headers, "pm25", path)?,
    );
    let mut values = vec![f64::NAN; grid.len()];
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let r: usize = row.get(ri).unwrap_or("").parse().map_err(|_| data_err(path, &row, "bad row index"))?;
        let c: usize = row.get(ci).unwrap_or("").parse().map_err(|_| data_err(path, &row, "bad col index"))?;
        let v = parse_f64(row.get(vi).unwrap_or(""), "pm25").map_err(|m| data_err(path, &row, m))?;
        if r >= grid.n_rows || c >= grid.n_cols {
            return Err(data_err(path, &row, format!("tile ({r}, {c}) outside the {}x{} grid", grid.n_rows, grid.n_cols)));
        }
        let j = grid.index(r, c);
        if !values[j].is_nan() {
            return Err(data_err(path, &row, format!("tile ({r}, {c}) listed twice")));
        }
        values[j] = v;
    }
    if let Some(j) = values.iter().position(|v| v.is_nan()) {
        let (r, c) = grid.row_col(j)?;
        return Err(Error::Data(format!("{}: raster has no value for tile ({r}, {c})", path.display())));
    }
    Ok(GroundTruthRaster::new(grid, values)?)
}

pub fn write_raster(path: &Path, raster: &GroundTruthRaster) -> Result<()> {
    let mut text = header_lines(&raster.grid);
    text.push_str("row,col,pm25\n");
    for (j, v) in raster.values.iter().enumerate() {
        let (r, c) = raster.grid.row_col(j)?;
        text.push_str(&format!("{r},{c},{}\n", fmt_f64(*v)));
    }
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads `id,lat,lon` nodes and `a,b[,length]` edges (lengths in meters).
pub fn read_road_graph(nodes_path: &Path, edges_path: &Path) -> Result<RoadGraph> {
    let mut reader = csv_reader(nodes_path)?;
    let headers = reader.headers().map_err(|e| Error::csv(nodes_path, e))?.clone();
    let (ii, la, lo) = (
        required_column(&headers, "id", nodes_path)?,
        required_column(&headers, "lat", nodes_path)?,
        required_column(&headers, "lon", nodes_path)?,
    );
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut nodes = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(nodes_path, e))?;
        let id = row.get(ii).unwrap_or("").to_string();
        let lat = parse_f64(row.get(la).unwrap_or(""), "lat").map_err(|m| data_err(nodes_path, &row, m))?;
        let lon = parse_f64(row.get(lo).unwrap_or(""), "lon").map_err(|m| data_err(nodes_path, &row, m))?;
        if ids.insert(id.clone(), nodes.len()).is_some() {
            return Err(data_err(nodes_path, &row, format!("duplicate node id {id:?}")));
        }
        nodes.push(GeoPoint { lat, lon });
    }
    let mut reader = csv_reader(edges_path)?;
    let headers = reader.headers().map_err(|e| Error::csv(edges_path, e))?.clone();
    let (ai, bi) = (required_column(&headers, "a", edges_path)?, required_column(&headers, "b", edges_path)?);
    let li = find_column(&headers, &["length".to_string()]);
    let mut edges = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(edges_path, e))?;
        let node = |k: usize| {
            let id = row.get(k).unwrap_or("");
            ids.get(id).copied().ok_or_else(|| data_err(edges_path, &row, format!("unknown node {id:?}")))
        };
        let length = match li {
            Some(k) => super::parse_opt_f64(row.get(k).unwrap_or("")).map_err(|m| data_err(edges_path, &row, m))?,
            None => None,
        };
        edges.push((node(ai)?, node(bi)?, length));
    }
    Ok(RoadGraph::new(nodes, &edges)?)
}

pub fn write_road_graph(nodes_path: &Path, edges_path: &Path, graph: &RoadGraph) -> Result<()> {
    let mut w = csv_writer(nodes_path)?;
    w.write_record(["id", "lat", "lon"]).map_err(|e| Error::csv(nodes_path, e))?;
    for (k, p) in graph.nodes().iter().enumerate() {
        w.write_record([k.to_string(), fmt_f64(p.lat), fmt_f64(p.lon)]).map_err(|e| Error::csv(nodes_path, e))?;
    }
    finish(w, nodes_path)?;
    let mut w = csv_writer(edges_path)?;
    w.write_record(["a", "b", "length"]).map_err(|e| Error::csv(edges_path, e))?;
    for e in graph.edges() {
        w.write_record([e.a.to_string(), e.b.to_string(), fmt_f64(e.length)]).map_err(|e| Error::csv(edges_path, e))?;
    }
    finish(w, edges_path)
}

/// Reads a `timestamp,pm25` station series.
pub fn read_station_series(path: &Path) -> Result<Vec<(Timestamp, f64)>> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let (ti, vi) = (required_column(&headers, "timestamp", path)?, required_column(&headers, "pm25", path)?);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let t = parse_timestamp(row.get(ti).unwrap_or("")).ok_or_else(|| data_err(path, &row, "bad timestamp"))?;
        let v = parse_f64(row.get(vi).unwrap_or(""), "pm25").map_err(|m| data_err(path, &row, m))?;
        out.push((t, v));
    }
    Ok(out)
}

pub fn write_station_series(path: &Path, series: &[(Timestamp, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["timestamp", "pm25"]).map_err(|e| Error::csv(path, e))?;
    for (t, v) in series {
        w.write_record([format_timestamp(*t), fmt_f64(*v)]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// A simulated reading as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub record: RawRecord,
    pub noise_free_raw: f64,
    pub tile: usize,
    pub route: usize,
    pub spike: bool,
}

impl SimRow {
    /// The row written for `o` at a constant `speed_mps`.
    pub fn new(o: &SimObservation, speed_mps: f64) -> Self {
        let record = RawRecord {
            device_id: format!("route{}", o.route),
            timestamp: o.t,
            lat: o.lat,
            lon: o.lon,
            pm25: Some(o.y_raw),
            speed: Some(speed_mps),
            rh: None,
            temp: None,
        };
        SimRow { record, noise_free_raw: o.noise_free_raw, tile: o.tile, route: o.route, spike: o.spike }
    }
}

const SIM_EXTRA: [&str; 4] = ["noise_free_raw", "tile", "route", "spike"];

/// Simulated readings in the ingest schema (device `route<k>`, constant
/// speed) plus `noise_free_raw`, `tile`, `route` and `spike`.
pub fn write_sim_observations(path: &Path, obs: &[SimObservation], speed_mps: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = record_header();
    header.extend(SIM_EXTRA);
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for o in obs {
        let r = SimRow::new(o, speed_mps);
        let mut row = record_fields(&r.record).to_vec();
        row.extend([fmt_f64(r.noise_free_raw), r.tile.to_string(), r.route.to_string(), u8::from(r.spike).to_string()]);
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn read_sim_observations(path: &Path) -> Result<Vec<SimRow>> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols = SchemaColumns::resolve(&headers, path)?;
    let extra: Vec<usize> = SIM_EXTRA.iter().map(|n| required_column(&headers, n, path)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let record = cols.parse(&row).map_err(|m| data_err(path, &row, m))?;
        let get = |k: usize| row.get(extra[k]).unwrap_or("");
        let noise_free_raw = parse_f64(get(0), "noise_free_raw").map_err(|m| data_err(path, &row, m))?;
        let tile = get(1).parse().map_err(|_| data_err(path, &row, "bad tile"))?;
        let route = get(2).parse().map_err(|_| data_err(path, &row, "bad route"))?;
        let spike = get(3) == "1";
        out.push(SimRow { record, noise_free_raw, tile, route, spike });
    }
    Ok(out)
}
