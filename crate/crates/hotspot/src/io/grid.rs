use super::{finish, fmt_f64};
use crate::error::{Error, Result};
use hotspot_core::geo::{BoundingBox, TileGrid};
use hotspot_core::hotspot::HotspotGrid;
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;

/// Grid geometry as stored in the `#` header block of gridded CSVs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub bbox: BoundingBox,
    pub tile_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridHeader {
    pub fn grid(&self) -> Result<TileGrid> {
        let g = TileGrid::new(self.bbox, self.tile_size)?;
        if (g.n_rows, g.n_cols) != (self.n_rows, self.n_cols) {
            return Err(Error::Data(format!(
                "grid header says {}x{} tiles but the box and tile size give {}x{}",
                self.n_rows, self.n_cols, g.n_rows, g.n_cols
            )));
        }
        Ok(g)
    }
}

pub(crate) fn header_lines(grid: &TileGrid) -> String {
    let b = grid.bbox;
    format!(
        "# bbox={},{},{},{}\n# tile_size={}\n# n_rows={}\n# n_cols={}\n",
        fmt_f64(b.min_lat),
        fmt_f64(b.max_lat),
        fmt_f64(b.min_lon),
        fmt_f64(b.max_lon),
        fmt_f64(grid.tile_size),
        grid.n_rows,
        grid.n_cols
    )
}

/// Reads the `# key=value` block at the top of a gridded CSV, if present.
pub fn read_grid_header(path: &Path) -> Result<Option<GridHeader>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Data(format!("{}: grid header: {m}", path.display()));
    let (mut bbox, mut tile, mut rows, mut cols) = (None, None, None, None);
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') else { continue };
        let v = v.trim();
        match k.trim() {
            "bbox" => {
                let p: Vec<f64> = v.split(',').map(|x| x.trim().parse().map_err(|_| bad("bad bbox"))).collect::<Result<_>>()?;
                if p.len() != 4 {
                    return Err(bad("bbox needs four values"));
                }
                bbox = Some(BoundingBox::new(p[0], p[1], p[2], p[3])?);
            }
            "tile_size" => tile = Some(v.parse::<f64>().map_err(|_| bad("bad tile_size"))?),
            "n_rows" => rows = Some(v.parse::<usize>().map_err(|_| bad("bad n_rows"))?),
            "n_cols" => cols = Some(v.parse::<usize>().map_err(|_| bad("bad n_cols"))?),
            _ => {}
        }
    }
    match (bbox, tile, rows, cols) {
        (None, None, None, None) => Ok(None),
        (Some(bbox), Some(tile_size), Some(n_rows), Some(n_cols)) => Ok(Some(GridHeader { bbox, tile_size, n_rows, n_cols })),
        _ => Err(bad("incomplete (needs bbox, tile_size, n_rows, n_cols)")),
    }
}

/// Per-tile scores: `j,row,col,lat,lon,mean,variance,h,hotspot,n_measurements`.
/// Unscored tiles have empty score fields.
pub fn write_grid_csv(path: &Path, hg: &HotspotGrid, p_crit: f64) -> Result<()> {
    let grid = &hg.grid;
    {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(header_lines(grid).as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    let file = std::fs::OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e| Error::csv(path, e);
    w.write_record(["j", "row", "col", "lat", "lon", "mean", "variance", "h", "hotspot", "n_measurements"]).map_err(csv_err)?;
    for j in 0..grid.len() {
        let (r, c) = grid.row_col(j)?;
        let centroid = grid.centroid(j)?;
        let (mean, var, h, hot) = match hg.scores[j] {
            Some(s) => (fmt_f64(s.mean), fmt_f64(s.variance), fmt_f64(s.h), (s.h > p_crit).to_string()),
            None => Default::default(),
        };
        w.write_record([
            j.to_string(),
            r.to_string(),
            c.to_string(),
            fmt_f64(centroid.lat),
            fmt_f64(centroid.lon),
            mean,
            var,
            h,
            hot,
            hg.n_measurements[j].to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w, path)
}

/// Tile polygons with `h`, `mean`, `variance`, `hotspot` and
/// `n_measurements` properties.
pub fn write_geojson(path: &Path, hg: &HotspotGrid, p_crit: f64) -> Result<()> {
    let grid = &hg.grid;
    let mut features = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let b = grid.tile_bounds(j)?;
        let (r, c) = grid.row_col(j)?;
        let ring = json!([
            [b.min_lon, b.min_lat],
            [b.max_lon, b.min_lat],
            [b.max_lon, b.max_lat],
            [b.min_lon, b.max_lat],
            [b.min_lon, b.min_lat]
        ]);
        let s = hg.scores[j];
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [ring]},
            "properties": {
                "j": j,
                "row": r,
                "col": c,
                "h": s.map(|s| s.h),
                "mean": s.map(|s| s.mean),
                "variance": s.map(|s| s.variance),
                "hotspot": s.map(|s| s.h > p_crit),
                "n_measurements": hg.n_measurements[j],
            }
        }));
    }
    let doc = json!({"type": "FeatureCollection", "features": Value::Array(features)});
    super::write_json(path, &doc)
}
