use hotspot_core::geo::{unproject, BoundingBox, GeoPoint, LocalXY, TileGrid};
use hotspot_core::simulate::{
    hourly_multipliers, place_along, shortest_route, synthesize, GroundTruthRaster, PlacedPoint, RoadGraph,
    RoadPosition, SimNoiseConfig,
};
use hotspot_core::time::Timestamp;
use proptest::prelude::*;

const SW: GeoPoint = GeoPoint { lat: -1.95, lon: 30.06 };

/// Random planar graph: nodes scattered in a 1 km square, edges among near pairs.
fn graph() -> impl Strategy<Value = RoadGraph> {
    (prop::collection::vec((0.0..1_000.0f64, 0.0..1_000.0f64), 3..25), prop::collection::vec((0usize..25, 0usize..25), 2..60))
        .prop_filter_map("needs an edge", |(pts, pairs)| {
            let nodes: Vec<GeoPoint> = pts.iter().map(|&(x, y)| unproject(LocalXY { x, y }, SW)).collect();
            let n = nodes.len();
            let mut edges: Vec<(usize, usize, Option<f64>)> =
                pairs.into_iter().map(|(a, b)| (a % n, b % n, None)).filter(|(a, b, _)| a != b).collect();
            edges.sort_unstable_by_key(|e| (e.0.min(e.1), e.0.max(e.1)));
            edges.dedup_by_key(|e| (e.0.min(e.1), e.0.max(e.1)));
            if edges.is_empty() {
                return None;
            }
            RoadGraph::new(nodes, &edges).ok()
        })
}

/// All-pairs node distances by Floyd–Warshall.
fn floyd(g: &RoadGraph) -> Vec<Vec<f64>> {
    let n = g.nodes().len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    (0..n).for_each(|i| d[i][i] = 0.0);
    for e in g.edges() {
        d[e.a][e.b] = d[e.a][e.b].min(e.length);
        d[e.b][e.a] = d[e.b][e.a].min(e.length);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn route_length_matches_floyd_warshall(g in graph(), picks in prop::collection::vec((any::<prop::sample::Index>(), 0.0..=1.0f64, any::<prop::sample::Index>(), 0.0..=1.0f64), 10)) {
        let d = floyd(&g);
        let edges = g.edges();
        for (i1, f1, i2, f2) in picks {
            let (e1, e2) = (i1.index(edges.len()), i2.index(edges.len()));
            let (a, b) = (edges[e1], edges[e2]);
            // Enumerate the four endpoint combinations plus the same-edge shortcut.
            let to_a = [f1 * a.length, (1.0 - f1) * a.length];
            let from_b = [f2 * b.length, (1.0 - f2) * b.length];
            let mut best = f64::INFINITY;
            for (u, du) in [a.a, a.b].into_iter().zip(to_a) {
                for (v, dv) in [b.a, b.b].into_iter().zip(from_b) {
                    best = best.min(du + d[u][v] + dv);
                }
            }
            if e1 == e2 {
                best = best.min((f1 - f2).abs() * a.length);
            }
            let r = shortest_route(&g, RoadPosition { edge: e1, fraction: f1 }, RoadPosition { edge: e2, fraction: f2 });
            match r {
                Some(r) => {
                    prop_assert!((r.length - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", r.length, best);
                    prop_assert!(r.nodes.windows(2).all(|w| g.edges().iter().any(|e| (e.a, e.b) == (w[0], w[1]) || (e.b, e.a) == (w[0], w[1]))));
                }
                None => prop_assert!(best.is_infinite()),
            }
        }
    }

    /// Points sit `spacing` apart along the polyline, one second apart.
    #[test]
    fn placement_follows_the_route(len_cells in 1usize..12, spacing in 1.0..40.0f64) {
        let g = RoadGraph::grid(SW, 1, len_cells + 1, 30.0).unwrap();
        let last = len_cells - 1;
        let r = shortest_route(&g, RoadPosition { edge: 0, fraction: 0.0 }, RoadPosition { edge: last, fraction: 1.0 }).unwrap();
        let length = 30.0 * len_cells as f64;
        prop_assert!((r.length - length).abs() < 1e-6);
        let pts = place_along(&g, &r, 0, spacing, Timestamp::from_seconds(100));
        prop_assert_eq!(pts.len(), (length / spacing + 1e-9).floor() as usize + 1);
        for (k, p) in pts.iter().enumerate() {
            prop_assert_eq!(p.t, Timestamp::from_seconds(100 + k as i64));
            let x = hotspot_core::geo::project(p.position, SW).unwrap().x;
            prop_assert!((x - k as f64 * spacing).abs() < 1e-6);
        }
    }
}

#[test]
fn noise_terms_have_the_configured_moments() {
    let bbox = BoundingBox::new(SW.lat, SW.lat + 0.01, SW.lon, SW.lon + 0.01).unwrap();
    let grid = TileGrid::new(bbox, 2_000.0).unwrap();
    let raster = GroundTruthRaster::new(grid, vec![40.0]).unwrap();
    let hm = hourly_multipliers(&[(Timestamp::from_seconds(0), 10.0)]).unwrap();
    let noise = SimNoiseConfig { seed: 5, ..Default::default() };
    let points: Vec<PlacedPoint> = (0..200_000)
        .map(|k| PlacedPoint { route: k / 500, position: bbox.center(), t: Timestamp::from_seconds(0) })
        .collect();
    let obs = synthesize(&points, &raster, &hm, &noise).unwrap();
    let n = obs.len() as f64;
    let spikes: Vec<f64> = obs.iter().filter(|o| o.spike).map(|o| o.noise_free_raw - 40.0).collect();
    let rate = spikes.len() as f64 / n;
    assert!((rate - 0.05).abs() < 0.003, "spike rate {rate}");
    // Gamma(shape 5, scale 5) has mean 25 and variance 125.
    let mean = spikes.iter().sum::<f64>() / spikes.len() as f64;
    assert!((mean - 25.0).abs() < 0.5, "spike mean {mean}");
    let eps: Vec<f64> = obs.iter().map(|o| o.y_raw - o.noise_free_raw).collect();
    let m = eps.iter().sum::<f64>() / n;
    let var = eps.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(m.abs() < 0.01 && (var - 1.0).abs() < 0.02, "eps mean {m} var {var}");
    assert!(obs.iter().filter(|o| !o.spike).all(|o| o.noise_free_raw == 40.0));
}
