//! Coordinates, local projection and the regular tile grid.
//!
//! All tiles are axis-aligned in a local equirectangular frame anchored at
//! the south-west corner of the bounding box, so in practice they are
//! latitude/longitude rectangles. Tiles on the north and east edges are
//! clipped to the bounding box; together the tiles partition it exactly.
//!
//! Membership is left-open: a point lying on an edge shared by two tiles
//! belongs to the tile with the lower index, and the bbox's own south/west
//! edges belong to the first row/column.

use crate::error::{domain, Result};
use crate::math;
use core::f64::consts::PI;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

const MAX_PROJECTION_LAT: f64 = 85.0;

/// Relative tolerance used to snap grid-coordinate ratios onto tile edges.
const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(domain!("invalid coordinate ({}, {})", self.lat, self.lon));
        }
        Ok(())
    }
}

/// Meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalXY {
    pub x: f64,
    pub y: f64,
}

impl LocalXY {
    pub fn distance(&self, other: &LocalXY) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        math::sqrt(dx * dx + dy * dy)
    }
}

#[inline]
fn meters_per_degree() -> f64 {
    EARTH_RADIUS_M * PI / 180.0
}

/// Equirectangular projection about `origin`.
pub fn project(p: GeoPoint, origin: GeoPoint) -> Result<LocalXY> {
    for q in [p, origin] {
        q.validate()?;
        if math::abs(q.lat) > MAX_PROJECTION_LAT {
            return Err(domain!("latitude {} outside projection range", q.lat));
        }
    }
    Ok(project_unchecked(p, origin))
}

#[inline]
pub(crate) fn project_unchecked(p: GeoPoint, origin: GeoPoint) -> LocalXY {
    let k = meters_per_degree();
    LocalXY {
        x: (p.lon - origin.lon) * math::cos(origin.lat.to_radians()) * k,
        y: (p.lat - origin.lat) * k,
    }
}

/// Inverse of [`project`].
pub fn unproject(xy: LocalXY, origin: GeoPoint) -> GeoPoint {
    let k = meters_per_degree();
    GeoPoint {
        lat: origin.lat + xy.y / k,
        lon: origin.lon + xy.x / (k * math::cos(origin.lat.to_radians())),
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la, lb) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lb - la;
    let dlon = (b.lon - a.lon).to_radians();
    let s1 = math::sin(dlat / 2.0);
    let s2 = math::sin(dlon / 2.0);
    let h = s1 * s1 + math::cos(la) * math::cos(lb) * s2 * s2;
    2.0 * EARTH_RADIUS_M * math::atan2(math::sqrt(h), math::sqrt(1.0 - h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64) -> Result<Self> {
        let b = BoundingBox { min_lat, max_lat, min_lon, max_lon };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        GeoPoint::new(self.min_lat, self.min_lon)?;
        GeoPoint::new(self.max_lat, self.max_lon)?;
        if !(self.min_lat < self.max_lat && self.min_lon < self.max_lon) {
            return Err(domain!("degenerate bounding box {:?}", self));
        }
        Ok(())
    }

    /// Closed containment test.
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn south_west(&self) -> GeoPoint {
        GeoPoint { lat: self.min_lat, lon: self.min_lon }
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: (self.min_lat + self.max_lat) / 2.0,
            lon: (self.min_lon + self.max_lon) / 2.0,
        }
    }
}

/// `ceil(v)` except that values within a relative hair of an integer snap to it.
fn snapped_ceil(v: f64) -> f64 {
    let r = math::round(v);
    if math::abs(v - r) <= EDGE_SNAP * r.max(1.0) {
        r
    } else {
        math::ceil(v)
    }
}

/// Index of the left-open cell of width `size` containing `v`, clamped to `[0, n)`.
fn cell_index(v: f64, size: f64, n: usize) -> usize {
    let k = snapped_ceil(v / size) - 1.0;
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n - 1)
    }
}

/// Regular square tiling of a bounding box, indexed row-major from the
/// south-west corner (`j = row * n_cols + col`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TileGrid {
    pub bbox: BoundingBox,
    /// Tile edge length in meters.
    pub tile_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub origin: GeoPoint,
}

impl TileGrid {
    /// Corner-aligned grid with `ceil(extent / tile_size)` tiles per axis.
    pub fn new(bbox: BoundingBox, tile_size: f64) -> Result<Self> {
        bbox.validate()?;
        if !(tile_size > 0.0 && tile_size.is_finite()) {
            return Err(domain!("tile size must be positive, got {tile_size}"));
        }
        let origin = bbox.south_west();
        let ne = project(GeoPoint { lat: bbox.max_lat, lon: bbox.max_lon }, origin)?;
        let n_cols = snapped_ceil(ne.x / tile_size) as usize;
        let n_rows = snapped_ceil(ne.y / tile_size) as usize;
        if n_cols == 0 || n_rows == 0 {
            return Err(domain!("grid over {:?} has no tiles", bbox));
        }
        Ok(TileGrid { bbox, tile_size, n_rows, n_cols, origin })
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Projected extent of the bounding box in meters.
    pub fn extent(&self) -> LocalXY {
        project_unchecked(GeoPoint { lat: self.bbox.max_lat, lon: self.bbox.max_lon }, self.origin)
    }

    pub fn row_col(&self, j: usize) -> Result<(usize, usize)> {
        if j >= self.len() {
            return Err(domain!("tile {j} out of range for {} tiles", self.len()));
        }
        Ok((j / self.n_cols, j % self.n_cols))
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn tile_of(&self, p: GeoPoint) -> Option<usize> {
        if !self.bbox.contains(p) {
            return None;
        }
        let xy = project_unchecked(p, self.origin);
        let col = cell_index(xy.x, self.tile_size, self.n_cols);
        let row = cell_index(xy.y, self.tile_size, self.n_rows);
        Some(self.index(row, col))
    }

    /// Tile `j` clipped to the bounding box.
    pub fn tile_bounds(&self, j: usize) -> Result<BoundingBox> {
        let (row, col) = self.row_col(j)?;
        let ext = self.extent();
        let x0 = col as f64 * self.tile_size;
        let y0 = row as f64 * self.tile_size;
        let x1 = ((col + 1) as f64 * self.tile_size).min(ext.x);
        let y1 = ((row + 1) as f64 * self.tile_size).min(ext.y);
        let sw = unproject(LocalXY { x: x0, y: y0 }, self.origin);
        let ne = unproject(LocalXY { x: x1, y: y1 }, self.origin);
        Ok(BoundingBox {
            min_lat: sw.lat,
            max_lat: if row + 1 == self.n_rows { self.bbox.max_lat } else { ne.lat },
            min_lon: sw.lon,
            max_lon: if col + 1 == self.n_cols { self.bbox.max_lon } else { ne.lon },
        })
    }

    /// Geometric center of (clipped) tile `j`.
    pub fn centroid(&self, j: usize) -> Result<GeoPoint> {
        let (row, col) = self.row_col(j)?;
        let ext = self.extent();
        let x0 = col as f64 * self.tile_size;
        let y0 = row as f64 * self.tile_size;
        let x1 = ((col + 1) as f64 * self.tile_size).min(ext.x);
        let y1 = ((row + 1) as f64 * self.tile_size).min(ext.y);
        Ok(unproject(LocalXY { x: (x0 + x1) / 2.0, y: (y0 + y1) / 2.0 }, self.origin))
    }
}

/// Coordinates handed to the GP kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CoordinateMode {
    /// Local projected meters; lengthscales are in meters.
    #[default]
    Meters,
    /// Raw `(lat, lon)` degrees.
    Degrees,
}

/// Maps geographic points to kernel input coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateFrame {
    pub mode: CoordinateMode,
    pub origin: GeoPoint,
}

impl CoordinateFrame {
    pub fn new(mode: CoordinateMode, origin: GeoPoint) -> Self {
        CoordinateFrame { mode, origin }
    }

    pub fn coords(&self, p: GeoPoint) -> [f64; 2] {
        match self.mode {
            CoordinateMode::Meters => {
                let xy = project_unchecked(p, self.origin);
                [xy.x, xy.y]
            }
            CoordinateMode::Degrees => [p.lat, p.lon],
        }
    }
}
