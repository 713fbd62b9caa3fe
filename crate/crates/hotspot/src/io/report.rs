use super::{csv_writer, finish, fmt_f64, fmt_opt};
use crate::error::{Error, Result};
use hotspot_core::diagnostics::DiurnalProfile;
use hotspot_core::evaluate::{IsotonicModel, Reliability};
use std::path::Path;

/// Flat `key,count` report.
pub fn write_key_counts(path: &Path, entries: &[(&str, usize)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["key", "count"]).map_err(|e| Error::csv(path, e))?;
    for (k, v) in entries {
        w.write_record([k.to_string(), v.to_string()]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Reliability bins of several labelled score sets:
/// `set,bin,lower,upper,count,conf,exc`.
pub fn write_calibration_csv(path: &Path, sets: &[(&str, &Reliability)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["set", "bin", "lower", "upper", "count", "conf", "exc"]).map_err(|e| Error::csv(path, e))?;
    for (name, rel) in sets {
        for b in &rel.bins {
            w.write_record([
                name.to_string(),
                b.index.to_string(),
                fmt_f64(b.lower),
                fmt_f64(b.upper),
                b.count.to_string(),
                fmt_opt(b.conf()),
                fmt_opt(b.exc()),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_isotonic_csv(path: &Path, model: &IsotonicModel) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["h", "h_cal"]).map_err(|e| Error::csv(path, e))?;
    for (x, y) in model.x.iter().zip(&model.y) {
        w.write_record([fmt_f64(*x), fmt_f64(*y)]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// `weekday,bucket,start_minute,count,mean,sd`; weekday is empty when the
/// profile is not split by day.
pub fn write_profile_csv(path: &Path, p: &DiurnalProfile) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["weekday", "bucket", "start_minute", "count", "mean", "sd"]).map_err(|e| Error::csv(path, e))?;
    for (d, row) in p.buckets.iter().enumerate() {
        for (k, b) in row.iter().enumerate() {
            let (mean, sd) = if b.count > 0 { (fmt_f64(b.mean), fmt_f64(b.sd)) } else { Default::default() };
            w.write_record([
                if p.by_weekday { d.to_string() } else { String::new() },
                k.to_string(),
                (k as u32 * p.bucket_minutes).to_string(),
                b.count.to_string(),
                mean,
                sd,
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    finish(w, path)
}

/// Generic table of already-formatted cells.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}
