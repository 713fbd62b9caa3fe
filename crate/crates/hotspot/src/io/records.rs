use super::{csv_reader, csv_writer, find_column, finish, fmt_f64, fmt_opt, parse_f64, parse_opt_f64, required_column};
use crate::config::ColumnMap;
use crate::error::{Error, Result};
use crate::timefmt::{format_timestamp, parse_timestamp};
use hotspot_core::ingest::RawRecord;
use hotspot_core::normalize::NormalizedObservation;
use std::path::Path;

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ParseIssue {
    pub file: String,
    /// 1-based line number.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<RawRecord>,
    pub issues: Vec<ParseIssue>,
}

enum TimeColumns {
    Single(usize),
    Split(usize, usize),
}

struct Layout {
    device: Option<usize>,
    time: TimeColumns,
    lat: usize,
    lon: usize,
    pm25: usize,
    speed: Option<usize>,
    rh: Option<usize>,
    temp: Option<usize>,
}

impl Layout {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap, path: &Path) -> Result<Self> {
        let need = |aliases: &[String], what: &str| {
            find_column(headers, aliases).ok_or_else(|| {
                Error::Data(format!("{}: no {what} column (looked for {})", path.display(), aliases.join(", ")))
            })
        };
        let time = match find_column(headers, &map.timestamp) {
            Some(i) => TimeColumns::Single(i),
            None => TimeColumns::Split(need(&map.date, "date")?, need(&map.time, "time")?),
        };
        Ok(Layout {
            device: find_column(headers, &map.device_id),
            time,
            lat: need(&map.lat, "latitude")?,
            lon: need(&map.lon, "longitude")?,
            pm25: need(&map.pm25, "PM2.5")?,
            speed: find_column(headers, &map.speed),
            rh: find_column(headers, &map.rh),
            temp: find_column(headers, &map.temp),
        })
    }

    fn parse(&self, row: &csv::StringRecord, default_device: &str) -> std::result::Result<RawRecord, String> {
        let get = |i: usize| row.get(i).unwrap_or("");
        let opt = |i: Option<usize>| i.map_or(Ok(None), |i| parse_opt_f64(get(i)));
        let time_text = match self.time {
            TimeColumns::Single(i) => get(i).to_string(),
            TimeColumns::Split(d, t) if !get(d).is_empty() && !get(t).is_empty() => format!("{} {}", get(d), get(t)),
            TimeColumns::Split(..) => String::new(),
        };
        if time_text.trim().is_empty() {
            return Err("missing date/time".into());
        }
        let timestamp = parse_timestamp(&time_text).ok_or_else(|| format!("cannot parse timestamp {time_text:?}"))?;
        let device_id = match self.device.map(get) {
            Some(d) if !d.is_empty() => d.to_string(),
            _ => default_device.to_string(),
        };
        Ok(RawRecord {
            device_id,
            timestamp,
            lat: parse_f64(get(self.lat), "latitude")?,
            lon: parse_f64(get(self.lon), "longitude")?,
            pm25: parse_opt_f64(get(self.pm25))?,
            speed: opt(self.speed)?,
            rh: opt(self.rh)?,
            temp: opt(self.temp)?,
        })
    }
}

/// Reads a raw sensor CSV. Malformed rows become [`ParseIssue`]s; a header
/// without the required columns is an error. Files without a device column
/// use the file stem as the device id.
pub fn read_records(path: &Path, map: &ColumnMap) -> Result<ParsedRecords> {
    let mut reader = csv_reader(path)?;
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::csv(path, e)),
    };
    let mut out = ParsedRecords::default();
    if headers.is_empty() {
        return Ok(out);
    }
    let layout = Layout::resolve(&headers, map, path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if layout.device.is_none() {
        log::warn!("{}: no device column; using {stem:?} as the device id", path.display());
    }
    let file = path.display().to_string();
    let mut row = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(0, |p| p.line());
                match layout.parse(&row, &stem) {
                    Ok(r) => out.records.push(r),
                    Err(message) => out.issues.push(ParseIssue { file: file.clone(), line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(Error::csv(path, e));
                }
                out.issues.push(ParseIssue { file: file.clone(), line, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

const RECORD_HEADER: [&str; 8] = ["device_id", "timestamp", "lat", "lon", "pm25", "speed", "rh", "temp"];

pub(crate) fn record_fields(r: &RawRecord) -> [String; 8] {
    [
        r.device_id.clone(),
        format_timestamp(r.timestamp),
        fmt_f64(r.lat),
        fmt_f64(r.lon),
        fmt_opt(r.pm25),
        fmt_opt(r.speed),
        fmt_opt(r.rh),
        fmt_opt(r.temp),
    ]
}

pub(crate) fn record_header() -> Vec<&'static str> {
    RECORD_HEADER.to_vec()
}

/// Writes records in the pipeline's own schema.
pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RECORD_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record(record_fields(r)).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_normalized(path: &Path, obs: &[NormalizedObservation]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = record_header();
    header.extend(["baseline", "y"]);
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for o in obs {
        let mut row = record_fields(&o.record).to_vec();
        row.push(fmt_f64(o.baseline));
        row.push(fmt_f64(o.y));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub(crate) struct SchemaColumns {
    idx: [usize; 8],
}

impl SchemaColumns {
    pub(crate) fn resolve(headers: &csv::StringRecord, path: &Path) -> Result<Self> {
        let mut idx = [0; 8];
        for (k, name) in RECORD_HEADER.iter().enumerate() {
            idx[k] = required_column(headers, name, path)?;
        }
        Ok(SchemaColumns { idx })
    }

    pub(crate) fn parse(&self, row: &csv::StringRecord) -> std::result::Result<RawRecord, String> {
        let get = |k: usize| row.get(self.idx[k]).unwrap_or("");
        Ok(RawRecord {
            device_id: get(0).to_string(),
            timestamp: parse_timestamp(get(1)).ok_or_else(|| format!("bad timestamp {:?}", get(1)))?,
            lat: parse_f64(get(2), "lat")?,
            lon: parse_f64(get(3), "lon")?,
            pm25: parse_opt_f64(get(4))?,
            speed: parse_opt_f64(get(5))?,
            rh: parse_opt_f64(get(6))?,
            temp: parse_opt_f64(get(7))?,
        })
    }
}

/// Reads a file written by [`write_normalized`]. Any malformed row is fatal.
pub fn read_normalized(path: &Path) -> Result<Vec<NormalizedObservation>> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols = SchemaColumns::resolve(&headers, path)?;
    let (b, y) = (required_column(&headers, "baseline", path)?, required_column(&headers, "y", path)?);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let bad = |m: String| Error::Data(format!("{} line {}: {m}", path.display(), row.position().map_or(0, |p| p.line())));
        let record = cols.parse(&row).map_err(bad)?;
        let baseline = parse_f64(row.get(b).unwrap_or(""), "baseline").map_err(bad)?;
        let yv = parse_f64(row.get(y).unwrap_or(""), "y").map_err(bad)?;
        out.push(NormalizedObservation { record, baseline, y: yv });
    }
    Ok(out)
}
