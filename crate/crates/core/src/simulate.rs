//! Synthetic mobile-sensing campaigns over a road graph and a ground-truth
//! raster.
//!
//! Journeys run between uniformly drawn on-road points along the shortest
//! path by edge length. Readings are placed at a fixed arc-length spacing,
//! one per second, and valued as
//! `y_raw = hm(t) · PM(tile) + κ·γ + ε` with `κ ~ Bernoulli(spike_prob)`,
//! `γ ~ Gamma` and `ε ~ Normal(0, gauss_sd²)`.
//!
//! Every random stream is derived from a seed and the route index, so routes
//! may be processed in any order (or in parallel) with identical output.

use crate::error::{domain, Error, Result};
use crate::geo::{project_unchecked, unproject, BoundingBox, GeoPoint, LocalXY, TileGrid};
use crate::math;
use crate::stats::{median, TotalF64};
use crate::time::Timestamp;
use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal};

/// Relative tolerance between a supplied edge length and its projected length.
const EDGE_LENGTH_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Length in meters.
    pub length: f64,
}

/// Undirected road network. May be disconnected.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    nodes: Vec<GeoPoint>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    origin: GeoPoint,
}

impl RoadGraph {
    /// Builds a graph from node positions and `(a, b, length)` edges. Missing
    /// lengths are taken from the projected endpoint distance; supplied ones
    /// must agree with it to within 1%.
    pub fn new(nodes: Vec<GeoPoint>, edges: &[(usize, usize, Option<f64>)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(domain!("road graph has no nodes"));
        }
        for p in &nodes {
            p.validate()?;
        }
        let origin = GeoPoint {
            lat: nodes.iter().map(|p| p.lat).fold(f64::INFINITY, f64::min),
            lon: nodes.iter().map(|p| p.lon).fold(f64::INFINITY, f64::min),
        };
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut out = Vec::with_capacity(edges.len());
        for (k, &(a, b, length)) in edges.iter().enumerate() {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(domain!("edge {k} references a missing node"));
            }
            let projected = project_unchecked(nodes[a], origin).distance(&project_unchecked(nodes[b], origin));
            let length = length.unwrap_or(projected);
            if !(length > 0.0 && length.is_finite()) {
                return Err(domain!("edge {k} ({a}-{b}) has non-positive length {length}"));
            }
            if math::abs(length - projected) > EDGE_LENGTH_TOLERANCE * projected {
                return Err(domain!(
                    "edge {k} ({a}-{b}) length {length} m disagrees with projected distance {projected} m"
                ));
            }
            adjacency[a].push((b, out.len()));
            adjacency[b].push((a, out.len()));
            out.push(Edge { a, b, length });
        }
        if out.is_empty() {
            return Err(domain!("road graph has no edges"));
        }
        Ok(RoadGraph { nodes, edges: out, adjacency, origin })
    }

    /// Rectangular street grid of `rows × cols` intersections spaced
    /// `spacing_m` apart, with its south-west node at `sw`.
    pub fn grid(sw: GeoPoint, rows: usize, cols: usize, spacing_m: f64) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(domain!("grid graph needs at least two nodes"));
        }
        let nodes: Vec<GeoPoint> = (0..rows * cols)
            .map(|k| unproject(LocalXY { x: (k % cols) as f64 * spacing_m, y: (k / cols) as f64 * spacing_m }, sw))
            .collect();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                if c + 1 < cols {
                    edges.push((k, k + 1, None));
                }
                if r + 1 < rows {
                    edges.push((k, k + cols, None));
                }
            }
        }
        RoadGraph::new(nodes, &edges)
    }

    pub fn nodes(&self) -> &[GeoPoint] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Projection origin used for route geometry.
    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    fn local(&self, node: usize) -> LocalXY {
        project_unchecked(self.nodes[node], self.origin)
    }

    fn position(&self, at: RoadPosition) -> GeoPoint {
        let e = self.edges[at.edge];
        let (pa, pb) = (self.local(e.a), self.local(e.b));
        let xy = LocalXY { x: pa.x + at.fraction * (pb.x - pa.x), y: pa.y + at.fraction * (pb.y - pa.y) };
        unproject(xy, self.origin)
    }
}

/// A point on an edge, `fraction` of the way from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadPosition {
    pub edge: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Intersections traversed, in order.
    pub nodes: Vec<usize>,
    /// Polyline from start point through `nodes` to end point.
    pub geometry: Vec<GeoPoint>,
    /// Path length by edge lengths, meters.
    pub length: f64,
}

struct PathSearch<'g> {
    graph: &'g RoadGraph,
    dist: Vec<f64>,
    prev: Vec<Option<usize>>,
}

impl<'g> PathSearch<'g> {
    fn new(graph: &'g RoadGraph) -> Self {
        let n = graph.nodes.len();
        PathSearch { graph, dist: vec![f64::INFINITY; n], prev: vec![None; n] }
    }

    /// Multi-source Dijkstra seeded with initial distances; stops once all
    /// `targets` are settled.
    fn run(&mut self, sources: &[(usize, f64)], targets: &[usize]) {
        self.dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        self.prev.iter_mut().for_each(|p| *p = None);
        let mut heap = BinaryHeap::new();
        for &(s, d0) in sources {
            if d0 < self.dist[s] {
                self.dist[s] = d0;
                heap.push(Reverse((TotalF64(d0), s)));
            }
        }
        let mut remaining = targets.len();
        let mut settled = vec![false; self.dist.len()];
        while let Some(Reverse((TotalF64(d), u))) = heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            if targets.contains(&u) {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            for &(v, e) in &self.graph.adjacency[u] {
                let nd = d + self.graph.edges[e].length;
                if nd < self.dist[v] {
                    self.dist[v] = nd;
                    self.prev[v] = Some(u);
                    heap.push(Reverse((TotalF64(nd), v)));
                }
            }
        }
    }

    fn path_to(&self, target: usize) -> Vec<usize> {
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.prev[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Shortest on-road route between two positions, or `None` if they lie in
/// different components.
pub fn shortest_route(graph: &RoadGraph, from: RoadPosition, to: RoadPosition) -> Option<Route> {
    let mut search = PathSearch::new(graph);
    route_with(&mut search, from, to)
}

fn route_with(search: &mut PathSearch<'_>, from: RoadPosition, to: RoadPosition) -> Option<Route> {
    let graph = search.graph;
    let e1 = graph.edges[from.edge];
    let e2 = graph.edges[to.edge];
    let sources = [(e1.a, from.fraction * e1.length), (e1.b, (1.0 - from.fraction) * e1.length)];
    search.run(&sources, &[e2.a, e2.b]);
    let via_a = search.dist[e2.a] + to.fraction * e2.length;
    let via_b = search.dist[e2.b] + (1.0 - to.fraction) * e2.length;
    let start = graph.position(from);
    let end = graph.position(to);
    let direct = (from.edge == to.edge).then(|| math::abs(from.fraction - to.fraction) * e1.length);
    let best_node = via_a.min(via_b);
    if let Some(d) = direct {
        if d <= best_node {
            return Some(Route { nodes: Vec::new(), geometry: vec![start, end], length: d });
        }
    }
    if !best_node.is_finite() {
        return None;
    }
    let last = if via_a <= via_b { e2.a } else { e2.b };
    let nodes = search.path_to(last);
    let mut geometry = Vec::with_capacity(nodes.len() + 2);
    geometry.push(start);
    geometry.extend(nodes.iter().map(|&k| graph.nodes[k]));
    geometry.push(end);
    Some(Route { nodes, geometry, length: best_node })
}

/// Draws an on-road position: edge chosen proportionally to length, offset
/// uniform along it.
pub fn random_position<R: Rng + ?Sized>(graph: &RoadGraph, cumulative: &[f64], rng: &mut R) -> RoadPosition {
    let total = *cumulative.last().expect("graph has edges");
    let u = rng.random::<f64>() * total;
    let edge = cumulative.partition_point(|&c| c <= u).min(graph.edges.len() - 1);
    RoadPosition { edge, fraction: rng.random::<f64>() }
}

/// Draws `n_pairs` journeys between random on-road points. Pairs that land in
/// different components are redrawn, at most `max_retries` times per pair.
pub fn sample_routes<R: Rng + ?Sized>(
    graph: &RoadGraph,
    n_pairs: usize,
    max_retries: usize,
    rng: &mut R,
) -> Result<Vec<Route>> {
    let cumulative: Vec<f64> = graph
        .edges
        .iter()
        .scan(0.0, |acc, e| {
            *acc += e.length;
            Some(*acc)
        })
        .collect();
    let mut search = PathSearch::new(graph);
    let mut routes = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let mut found = None;
        for _ in 0..=max_retries {
            let from = random_position(graph, &cumulative, rng);
            let to = random_position(graph, &cumulative, rng);
            if let Some(r) = route_with(&mut search, from, to) {
                found = Some(r);
                break;
            }
        }
        match found {
            Some(r) => routes.push(r),
            None => {
                return Err(Error::Generation(format!(
                    "route {k}: no connected endpoint pair after {} draws; graph too fragmented",
                    max_retries + 1
                )))
            }
        }
    }
    Ok(routes)
}

/// RNG stream `stream` of a seed; placement and noise use disjoint streams.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn placement_rng(seed: u64, route: usize) -> ChaCha8Rng {
    stream_rng(seed, (route as u64) << 1)
}

fn noise_rng(seed: u64, route: usize) -> ChaCha8Rng {
    stream_rng(seed, ((route as u64) << 1) | 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedPoint {
    pub route: usize,
    pub position: GeoPoint,
    pub t: Timestamp,
}

/// Points at arc length `0, s, 2s, …` along `route`, one second apart from `start`.
pub fn place_along(graph: &RoadGraph, route: &Route, route_index: usize, spacing: f64, start: Timestamp) -> Vec<PlacedPoint> {
    let origin = graph.origin;
    let xy: Vec<LocalXY> = route.geometry.iter().map(|p| project_unchecked(*p, origin)).collect();
    let seg: Vec<f64> = xy.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let total: f64 = seg.iter().sum();
    let count = math::floor(total / spacing + 1e-9) as usize + 1;
    let mut out = Vec::with_capacity(count);
    let (mut k_seg, mut seg_start) = (0usize, 0.0f64);
    for k in 0..count {
        let s = k as f64 * spacing;
        while k_seg + 1 < seg.len() && s > seg_start + seg[k_seg] {
            seg_start += seg[k_seg];
            k_seg += 1;
        }
        let p = if seg.is_empty() || seg[k_seg] == 0.0 {
            xy[k_seg]
        } else {
            let f = ((s - seg_start) / seg[k_seg]).clamp(0.0, 1.0);
            let (a, b) = (xy[k_seg], xy[k_seg + 1]);
            LocalXY { x: a.x + f * (b.x - a.x), y: a.y + f * (b.y - a.y) }
        };
        out.push(PlacedPoint { route: route_index, position: unproject(p, origin), t: start.add_seconds(k as i64) });
    }
    out
}

/// Places readings along every route. Each journey starts at a whole second
/// drawn uniformly from `[period.0, period.1)`.
pub fn place_observations(
    graph: &RoadGraph,
    routes: &[Route],
    spacing: f64,
    period: (Timestamp, Timestamp),
    seed: u64,
) -> Result<Vec<PlacedPoint>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(domain!("spacing must be positive, got {spacing}"));
    }
    let (s0, s1) = (period.0.second(), period.1.second());
    if s0 >= s1 {
        return Err(domain!("simulation period is empty"));
    }
    let mut out = Vec::new();
    for (r, route) in routes.iter().enumerate() {
        let start = Timestamp::from_seconds(placement_rng(seed, r).random_range(s0..s1));
        out.extend(place_along(graph, route, r, spacing, start));
    }
    Ok(out)
}

/// Station readings scaled by their overall median, keyed by UTC day and hour.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyMultipliers {
    by_hour: [BTreeMap<i64, f64>; 24],
    median: f64,
}

impl HourlyMultipliers {
    /// Median of the source series.
    pub fn median(&self) -> f64 {
        self.median
    }

    pub fn len(&self) -> usize {
        self.by_hour.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(day, hour, multiplier)` entries.
    pub fn entries(&self) -> impl Iterator<Item = (i64, u8, f64)> + '_ {
        self.by_hour.iter().enumerate().flat_map(|(h, m)| m.iter().map(move |(d, v)| (*d, h as u8, *v)))
    }

    /// Multiplier for the hour containing `t`. Hours absent from the series
    /// take the same hour from the nearest available day (earlier on ties).
    pub fn get(&self, t: Timestamp) -> Result<f64> {
        let (day, hour) = (t.day(0), t.hour(0));
        let m = &self.by_hour[hour as usize];
        if let Some(v) = m.get(&day) {
            return Ok(*v);
        }
        let before = m.range(..day).next_back();
        let after = m.range(day..).next();
        match (before, after) {
            (Some((db, vb)), Some((da, va))) => Ok(if day - db <= da - day { *vb } else { *va }),
            (Some((_, v)), None) | (None, Some((_, v))) => Ok(*v),
            (None, None) => Err(Error::Generation(format!("no station reading for hour {hour} on any day"))),
        }
    }
}

/// Converts an hourly station series into multipliers `value / median(series)`.
/// Several readings in one hour are averaged first.
pub fn hourly_multipliers(series: &[(Timestamp, f64)]) -> Result<HourlyMultipliers> {
    if series.is_empty() {
        return Err(domain!("station series is empty"));
    }
    if let Some((t, v)) = series.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(domain!("station reading {v} at {t:?} must be positive"));
    }
    let values: Vec<f64> = series.iter().map(|(_, v)| *v).collect();
    let med = median(&values).expect("non-empty");
    if !(med > 0.0) {
        return Err(domain!("station series median {med} must be positive"));
    }
    let mut sums: BTreeMap<(i64, u8), (f64, usize)> = BTreeMap::new();
    for (t, v) in series {
        let e = sums.entry((t.day(0), t.hour(0))).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let mut by_hour: [BTreeMap<i64, f64>; 24] = Default::default();
    for ((day, hour), (s, c)) in sums {
        by_hour[hour as usize].insert(day, s / c as f64 / med);
    }
    Ok(HourlyMultipliers { by_hour, median: med })
}

/// Mean PM2.5 per tile of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRaster {
    pub grid: TileGrid,
    pub values: Vec<f64>,
}

impl GroundTruthRaster {
    pub fn new(grid: TileGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(domain!("raster has {} values for {} tiles", values.len(), grid.len()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(domain!("raster value {v} must be finite and non-negative"));
        }
        Ok(GroundTruthRaster { grid, values })
    }

    pub fn bbox(&self) -> BoundingBox {
        self.grid.bbox
    }

    pub fn sample(&self, p: GeoPoint) -> Option<(usize, f64)> {
        self.grid.tile_of(p).map(|j| (j, self.values[j]))
    }
}

/// Parameterization of the spike-size Gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GammaParameterization {
    /// `gamma_scale` is the scale θ; mean = shape · θ.
    #[default]
    ShapeScale,
    /// `gamma_scale` is read as a rate β; mean = shape / β.
    ShapeRate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimNoiseConfig {
    pub spike_prob: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub gamma_parameterization: GammaParameterization,
    pub gauss_sd: f64,
    pub seed: u64,
}

impl Default for SimNoiseConfig {
    fn default() -> Self {
        SimNoiseConfig {
            spike_prob: 0.05,
            gamma_shape: 5.0,
            gamma_scale: 5.0,
            gamma_parameterization: GammaParameterization::ShapeScale,
            gauss_sd: 1.0,
            seed: 0,
        }
    }
}

impl SimNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.spike_prob) {
            return Err(domain!("spike_prob must lie in [0, 1]"));
        }
        for (name, v) in [("gamma_shape", self.gamma_shape), ("gamma_scale", self.gamma_scale), ("gauss_sd", self.gauss_sd)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn gamma(&self) -> Gamma<f64> {
        let scale = match self.gamma_parameterization {
            GammaParameterization::ShapeScale => self.gamma_scale,
            GammaParameterization::ShapeRate => 1.0 / self.gamma_scale,
        };
        Gamma::new(self.gamma_shape, scale).expect("validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimObservation {
    pub route: usize,
    pub lat: f64,
    pub lon: f64,
    pub t: Timestamp,
    pub tile: usize,
    /// Observed value `noise_free_raw + ε`.
    pub y_raw: f64,
    /// `hm(t) · PM(tile) + κ·γ`.
    pub noise_free_raw: f64,
    /// Whether the spike term fired.
    pub spike: bool,
}

/// Values every placed point. Points must be grouped by route (as produced
/// by [`place_observations`]).
pub fn synthesize(
    points: &[PlacedPoint],
    raster: &GroundTruthRaster,
    hm: &HourlyMultipliers,
    noise: &SimNoiseConfig,
) -> Result<Vec<SimObservation>> {
    noise.validate()?;
    let spike = Bernoulli::new(noise.spike_prob).map_err(|e| domain!("{e}"))?;
    let gamma = noise.gamma();
    let gauss = Normal::new(0.0, noise.gauss_sd).map_err(|e| domain!("{e}"))?;
    let mut out = Vec::with_capacity(points.len());
    let mut current: Option<(usize, ChaCha8Rng)> = None;
    for p in points {
        let rng = match &mut current {
            Some((r, rng)) if *r == p.route => rng,
            _ => &mut current.insert((p.route, noise_rng(noise.seed, p.route))).1,
        };
        let Some((tile, pm)) = raster.sample(p.position) else {
            return Err(Error::Generation(format!(
                "point ({}, {}) of route {} lies outside the raster",
                p.position.lat, p.position.lon, p.route
            )));
        };
        let mult = hm.get(p.t)?;
        let fired = spike.sample(rng);
        let spike_value = if fired { gamma.sample(rng) } else { 0.0 };
        let noise_free = mult * pm + spike_value;
        let eps = gauss.sample(rng);
        out.push(SimObservation {
            route: p.route,
            lat: p.position.lat,
            lon: p.position.lon,
            t: p.t,
            tile,
            y_raw: noise_free + eps,
            noise_free_raw: noise_free,
            spike: fired,
        });
    }
    Ok(out)
}

/// Route and placement settings of a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CampaignConfig {
    pub n_pairs: usize,
    /// Meters between consecutive readings (30 km/h at 1 Hz is 8.33 m).
    pub spacing_m: f64,
    pub period_start: Timestamp,
    pub period_end: Timestamp,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            n_pairs: 10_000,
            spacing_m: 30_000.0 / 3_600.0,
            // September 2019, UTC.
            period_start: Timestamp::from_seconds(1_567_296_000),
            period_end: Timestamp::from_seconds(1_569_888_000),
            max_retries: 100,
            seed: 0,
        }
    }
}

/// Routes, placement and synthesis in one call.
pub fn simulate_campaign(
    graph: &RoadGraph,
    raster: &GroundTruthRaster,
    hm: &HourlyMultipliers,
    campaign: &CampaignConfig,
    noise: &SimNoiseConfig,
) -> Result<Vec<SimObservation>> {
    let mut rng = stream_rng(campaign.seed, u64::MAX);
    let routes = sample_routes(graph, campaign.n_pairs, campaign.max_retries, &mut rng)?;
    let points = place_observations(
        graph,
        &routes,
        campaign.spacing_m,
        (campaign.period_start, campaign.period_end),
        campaign.seed,
    )?;
    synthesize(&points, raster, hm, noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(len_m: f64) -> RoadGraph {
        let a = GeoPoint { lat: 0.0, lon: 0.0 };
        let b = unproject(LocalXY { x: len_m, y: 0.0 }, a);
        RoadGraph::new(vec![a, b], &[(0, 1, None)]).unwrap()
    }

    #[test]
    fn single_edge_routes() {
        let g = line_graph(100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for r in sample_routes(&g, 20, 0, &mut rng).unwrap() {
            assert!(r.nodes.is_empty());
            assert_eq!(r.geometry.len(), 2);
            assert!(r.length <= 100.0);
        }
    }

    #[test]
    fn placement_spacing() {
        let g = line_graph(100.0);
        let route = Route {
            nodes: vec![],
            geometry: vec![GeoPoint { lat: 0.0, lon: 0.0 }, g.position(RoadPosition { edge: 0, fraction: 0.25 })],
            length: 25.0,
        };
        let pts = place_along(&g, &route, 0, 8.33, Timestamp::from_seconds(100));
        assert_eq!(pts.len(), 4);
        let x: Vec<f64> = pts.iter().map(|p| project_unchecked(p.position, g.origin()).x).collect();
        for (k, xk) in x.iter().enumerate() {
            assert!((xk - 8.33 * k as f64).abs() < 1e-6);
        }
        assert_eq!(pts[3].t, Timestamp::from_seconds(103));
        let still = Route { nodes: vec![], geometry: vec![route.geometry[0], route.geometry[0]], length: 0.0 };
        assert_eq!(place_along(&g, &still, 0, 8.33, Timestamp::from_seconds(0)).len(), 1);
    }

    #[test]
    fn multiplier_examples() {
        let series: Vec<(Timestamp, f64)> =
            [10.0, 20.0, 30.0].iter().enumerate().map(|(h, v)| (Timestamp::from_seconds(h as i64 * 3600), *v)).collect();
        let hm = hourly_multipliers(&series).unwrap();
        let got: Vec<f64> = (0..3).map(|h| hm.get(Timestamp::from_seconds(h * 3600 + 59)).unwrap()).collect();
        assert_eq!(got, vec![0.5, 1.0, 1.5]);
        // Next day, hour 1 missing: borrowed from day 0.
        assert_eq!(hm.get(Timestamp::from_seconds(86_400 + 3_600)).unwrap(), 1.0);
        assert!(hm.get(Timestamp::from_seconds(5 * 3600)).is_err());
        assert!(hourly_multipliers(&[(Timestamp::from_seconds(0), 0.0)]).is_err());
        let flat: Vec<(Timestamp, f64)> = (0..48).map(|h| (Timestamp::from_seconds(h * 3600), 42.0)).collect();
        assert!(hourly_multipliers(&flat).unwrap().entries().all(|(_, _, v)| v == 1.0));
    }

    #[test]
    fn rejects_inconsistent_edges() {
        let a = GeoPoint { lat: 0.0, lon: 0.0 };
        let b = unproject(LocalXY { x: 100.0, y: 0.0 }, a);
        assert!(RoadGraph::new(vec![a, b], &[(0, 1, Some(100.5))]).is_ok());
        assert!(RoadGraph::new(vec![a, b], &[(0, 1, Some(102.0))]).is_err());
        assert!(RoadGraph::new(vec![a, a], &[(0, 1, None)]).is_err());
        assert!(RoadGraph::new(vec![a, b], &[(0, 2, None)]).is_err());
    }

    #[test]
    fn fragmented_graph_exhausts_retries() {
        // Two components of equal length: about half of all pairs straddle them.
        let a = GeoPoint { lat: 0.0, lon: 0.0 };
        let pts: Vec<GeoPoint> = [0.0, 100.0, 5000.0, 5100.0]
            .iter()
            .map(|x| unproject(LocalXY { x: *x, y: 0.0 }, a))
            .collect();
        let g = RoadGraph::new(pts, &[(0, 1, None), (2, 3, None)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_routes(&g, 50, 200, &mut rng).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(sample_routes(&g, 200, 0, &mut rng), Err(Error::Generation(_))));
    }
}
