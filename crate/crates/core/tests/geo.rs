use hotspot_core::geo::{haversine, project, unproject, BoundingBox, GeoPoint, LocalXY, TileGrid};
use proptest::prelude::*;

proptest! {
    #[test]
    fn projection_round_trips(lat0 in -80.0..80.0f64, lon0 in -179.0..179.0f64, dx in -5e3..5e3f64, dy in -5e3..5e3f64) {
        let origin = GeoPoint::new(lat0, lon0).unwrap();
        let p = unproject(LocalXY { x: dx, y: dy }, origin);
        let back = project(p, origin).unwrap();
        prop_assert!((back.x - dx).abs() < 1e-6 && (back.y - dy).abs() < 1e-6);
    }

    /// Within a few kilometres the projected distance is close to the
    /// great-circle distance.
    #[test]
    fn projection_agrees_with_haversine(lat0 in -60.0..60.0f64, lon0 in -170.0..170.0f64, dx in -3e3..3e3f64, dy in -3e3..3e3f64) {
        let origin = GeoPoint::new(lat0, lon0).unwrap();
        let p = unproject(LocalXY { x: dx, y: dy }, origin);
        let planar = dx.hypot(dy);
        let great = haversine(origin, p);
        prop_assert!((planar - great).abs() <= 1e-3 * planar.max(1.0), "{} vs {}", planar, great);
    }

    /// Every point inside the box lands in exactly one tile whose bounds contain it.
    #[test]
    fn tiles_partition_the_box(
        lat in -45.0..45.0f64,
        lon in -100.0..100.0f64,
        w in 100.0..3_000.0f64,
        h in 100.0..3_000.0f64,
        tile in 50.0..700.0f64,
        u in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 50),
    ) {
        let sw = GeoPoint::new(lat, lon).unwrap();
        let ne = unproject(LocalXY { x: w, y: h }, sw);
        let bbox = BoundingBox::new(sw.lat, ne.lat, sw.lon, ne.lon).unwrap();
        let grid = TileGrid::new(bbox, tile).unwrap();
        prop_assert_eq!(grid.n_cols, (w / tile).ceil() as usize);
        for (a, b) in u {
            let p = GeoPoint { lat: bbox.min_lat + a * (bbox.max_lat - bbox.min_lat), lon: bbox.min_lon + b * (bbox.max_lon - bbox.min_lon) };
            let j = grid.tile_of(p).expect("inside the box");
            let tb = grid.tile_bounds(j).unwrap();
            let eps = 1e-9;
            let inside = p.lat >= tb.min_lat - eps && p.lat <= tb.max_lat + eps && p.lon >= tb.min_lon - eps && p.lon <= tb.max_lon + eps;
            prop_assert!(inside, "{:?} not in tile {} {:?}", p, j, tb);
        }
        for j in 0..grid.len() {
            prop_assert_eq!(grid.tile_of(grid.centroid(j).unwrap()), Some(j));
        }
    }
}
