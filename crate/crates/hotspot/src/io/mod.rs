//! File formats. All CSVs use `.` decimals and ISO-8601 UTC timestamps;
//! floats are written in shortest round-trip form so files re-read exactly.

mod grid;
mod records;
mod report;
mod sim;

pub use grid::{read_grid_header, write_geojson, write_grid_csv, GridHeader};
pub use records::{read_normalized, read_records, write_normalized, write_records, ParseIssue, ParsedRecords};
pub use report::{write_calibration_csv, write_isotonic_csv, write_key_counts, write_profile_csv, write_table_csv};
pub use sim::{
    read_raster, read_road_graph, read_sim_observations, read_station_series, write_raster, write_road_graph,
    write_sim_observations, write_station_series, SimRow,
};

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::path::Path;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(file))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(file))
}

pub(crate) fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Column index of the first header matching any alias (case-insensitive).
pub(crate) fn find_column(headers: &csv::StringRecord, aliases: &[String]) -> Option<usize> {
    aliases.iter().find_map(|a| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(a.trim())))
}

pub(crate) fn required_column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    find_column(headers, &[name.to_string()])
        .ok_or_else(|| Error::Data(format!("{}: missing column {name:?}", path.display())))
}

/// Parses a float field; empty and NA-like values are `None`.
pub(crate) fn parse_opt_f64(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() || ["na", "nan", "null", "none"].iter().any(|n| s.eq_ignore_ascii_case(n)) {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| format!("cannot parse {s:?} as a number"))
}

pub(crate) fn parse_f64(s: &str, what: &str) -> std::result::Result<f64, String> {
    parse_opt_f64(s)?.ok_or_else(|| format!("missing {what}"))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
