//! Data processing: converts perceived obstacles into Frenet point sets.
//!
//! Vehicles become safety-augmented boxes, static pedestrians are clustered
//! with DBSCAN and wrapped in convex hulls, and moving obstacles carry a
//! constant-velocity lateral prediction per planning station.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frenet::{FrenetError, FrenetPoint, ReferencePath};
use crate::geometry::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObstacleError {
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error("obstacle {id} has kind {kind:?}, expected {expected:?}")]
    WrongKind {
        id: usize,
        kind: ObstacleKind,
        expected: ObstacleKind,
    },
    #[error("obstacle {0} has non-positive size")]
    InvalidSize(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    Vehicle,
    Pedestrian,
}

/// An obstacle as reported by perception, in Cartesian coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawObstacle {
    pub id: usize,
    pub kind: ObstacleKind,
    pub position: Point2,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub velocity: Point2,
}

impl RawObstacle {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Footprint corners (counterclockwise) grown by the given margins.
    pub fn corners(&self, margin_long: f64, margin_lat: f64) -> [Point2; 4] {
        let hl = self.length / 2.0 + margin_long;
        let hw = self.width / 2.0 + margin_lat;
        [
            Point2::new(hl, -hw),
            Point2::new(hl, hw),
            Point2::new(-hl, hw),
            Point2::new(-hl, -hw),
        ]
        .map(|c| self.position + c.rotate(self.yaw))
    }
}

/// Convex obstacle outline in the Frenet frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstaclePolygon {
    /// Ids of the raw obstacles merged into this polygon.
    pub ids: Vec<usize>,
    /// Counterclockwise hull vertices in (s, d).
    pub vertices: Vec<FrenetPoint>,
    /// Points interpolated along every edge, vertices included.
    pub edge_samples: Vec<FrenetPoint>,
    pub is_dynamic: bool,
    /// Predicted lateral position per planning station; `None` where the
    /// prediction never reaches the station.
    pub predicted_d: Option<Vec<Option<f64>>>,
}

impl ObstaclePolygon {
    fn from_hull(vertices: Vec<FrenetPoint>, sample_spacing: f64) -> Self {
        let edge_samples = sample_edges(&vertices, sample_spacing);
        Self {
            ids: Vec::new(),
            vertices,
            edge_samples,
            is_dynamic: false,
            predicted_d: None,
        }
    }

    pub fn with_ids(mut self, ids: Vec<usize>) -> Self {
        self.ids = ids;
        self
    }

    pub fn with_prediction(mut self, predicted_d: Vec<Option<f64>>) -> Self {
        self.is_dynamic = true;
        self.predicted_d = Some(predicted_d);
        self
    }

    /// Key used for decision memory across planning cycles.
    pub fn key(&self) -> Option<usize> {
        self.ids.iter().copied().min()
    }

    pub fn s_range(&self) -> (f64, f64) {
        extent(&self.vertices, |p| p.s)
    }

    pub fn d_range(&self) -> (f64, f64) {
        extent(&self.vertices, |p| p.d)
    }

    pub fn centroid(&self) -> FrenetPoint {
        let n = self.vertices.len() as f64;
        let (s, d) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(s, d), p| (s + p.s, d + p.d));
        FrenetPoint::new(s / n, d / n)
    }

    /// Signed distance of `p` inside the polygon: the minimum over edges of
    /// the left-hand cross product, normalized by edge length. Non-negative
    /// means inside or on the boundary.
    pub fn containment_margin(&self, p: FrenetPoint) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let e = Point2::new(b.s - a.s, b.d - a.d);
                let w = Point2::new(p.s - a.s, p.d - a.d);
                e.cross(w) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn extent(points: &[FrenetPoint], f: impl Fn(&FrenetPoint) -> f64) -> (f64, f64) {
    points
        .iter()
        .map(f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// The obstacle set handed to the decision governor.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObstacleSet {
    pub all: Vec<ObstaclePolygon>,
    pub dynamic_count: usize,
}

impl ObstacleSet {
    pub fn new(all: Vec<ObstaclePolygon>) -> Self {
        let dynamic_count = all.iter().filter(|p| p.is_dynamic).count();
        Self { all, dynamic_count }
    }

    pub fn statics(&self) -> impl Iterator<Item = &ObstaclePolygon> {
        self.all.iter().filter(|p| !p.is_dynamic)
    }

    pub fn dynamics(&self) -> impl Iterator<Item = &ObstaclePolygon> {
        self.all.iter().filter(|p| p.is_dynamic)
    }
}

/// Interpolates points along each polygon edge at spacing at most `spacing`.
pub fn sample_edges(vertices: &[FrenetPoint], spacing: f64) -> Vec<FrenetPoint> {
    let n = vertices.len();
    if n == 1 {
        return vertices.to_vec();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let len = (b.s - a.s).hypot(b.d - a.d);
        let pieces = ((len / spacing).ceil() as usize).max(1);
        for j in 0..pieces {
            let t = j as f64 / pieces as f64;
            out.push(FrenetPoint::new(
                a.s + (b.s - a.s) * t,
                a.d + (b.d - a.d) * t,
            ));
        }
    }
    out
}

/// Safety-augmented bounding box of a vehicle in the Frenet frame.
///
/// The grown rectangle's edges are sampled in Cartesian space, every sample
/// is projected, and the convex hull of the projections is returned. On a
/// curved reference this over-approximates the (possibly non-convex) image
/// of the box.
pub fn inflate_vehicle(
    o: &RawObstacle,
    margin_long: f64,
    margin_lat: f64,
    reference: &ReferencePath,
    sample_spacing: f64,
) -> Result<ObstaclePolygon, ObstacleError> {
    if o.kind != ObstacleKind::Vehicle {
        return Err(ObstacleError::WrongKind {
            id: o.id,
            kind: o.kind,
            expected: ObstacleKind::Vehicle,
        });
    }
    if !(o.length > 0.0 && o.width > 0.0) {
        return Err(ObstacleError::InvalidSize(o.id));
    }
    let corners = o.corners(margin_long, margin_lat);
    let mut projected = Vec::new();
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let pieces = ((a.distance(b) / sample_spacing).ceil() as usize).max(1);
        for j in 0..pieces {
            let p = a.lerp(b, j as f64 / pieces as f64);
            projected.push(reference.cart_to_frenet(p)?);
        }
    }
    let hull = hull_vertices(&projected);
    Ok(ObstaclePolygon::from_hull(hull, sample_spacing).with_ids(vec![o.id]))
}

/// Minkowski sum of a polygon with the ego box aligned to the reference,
/// so the result bounds the ego centroid.
pub fn grow_by_footprint(
    poly: &ObstaclePolygon,
    ego: EgoFootprint,
    sample_spacing: f64,
) -> ObstaclePolygon {
    let (hl, hw) = (ego.half_length, ego.half_width);
    let points: Vec<FrenetPoint> = poly
        .vertices
        .iter()
        .flat_map(|v| {
            [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
                .map(|(ds, dd)| FrenetPoint::new(v.s + ds, v.d + dd))
        })
        .collect();
    ObstaclePolygon::from_hull(hull_vertices(&points), sample_spacing).with_ids(poly.ids.clone())
}

/// Result of density clustering: indices into the input slice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Clustering {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

fn canonical_cmp(a: &FrenetPoint, b: &FrenetPoint) -> Ordering {
    a.s.total_cmp(&b.s).then(a.d.total_cmp(&b.d))
}

/// DBSCAN over Frenet positions.
///
/// Points are visited in (s, d) order so that cluster membership, including
/// the assignment of border points reachable from two clusters, does not
/// depend on the input order. A point is core when at least `min_pts`
/// points (itself included) lie within `eps`.
pub fn cluster_pedestrians(points: &[FrenetPoint], eps: f64, min_pts: usize) -> Clustering {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| canonical_cmp(&points[a], &points[b]).then(a.cmp(&b)));

    let neighbours = |i: usize| -> Vec<usize> {
        order
            .iter()
            .copied()
            .filter(|&j| {
                let (a, b) = (points[i], points[j]);
                (a.s - b.s).hypot(a.d - b.d) <= eps
            })
            .collect()
    };

    const UNVISITED: isize = -2;
    const NOISE: isize = -1;
    let mut label = vec![UNVISITED; n];
    let mut next_cluster = 0isize;
    for &i in &order {
        if label[i] != UNVISITED {
            continue;
        }
        let seeds = neighbours(i);
        if seeds.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        label[i] = cluster;
        let mut queue: std::collections::VecDeque<usize> = seeds.into();
        while let Some(j) = queue.pop_front() {
            if label[j] == NOISE {
                label[j] = cluster;
            }
            if label[j] != UNVISITED {
                continue;
            }
            label[j] = cluster;
            let more = neighbours(j);
            if more.len() >= min_pts {
                queue.extend(more);
            }
        }
    }

    let mut clusters = vec![Vec::new(); next_cluster as usize];
    let mut noise = Vec::new();
    for &i in &order {
        match label[i] {
            NOISE => noise.push(i),
            c => clusters[c as usize].push(i),
        }
    }
    Clustering { clusters, noise }
}

/// Andrew's monotone chain. Returns counterclockwise vertices with
/// collinear points dropped; fewer than three entries for degenerate input.
fn hull_vertices(points: &[FrenetPoint]) -> Vec<FrenetPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(canonical_cmp);
    pts.dedup_by(|a, b| a.s == b.s && a.d == b.d);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: FrenetPoint, a: FrenetPoint, b: FrenetPoint| {
        (a.s - o.s) * (b.d - o.d) - (a.d - o.d) * (b.s - o.s)
    };
    let mut hull: Vec<FrenetPoint> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Vertices of a regular octagon with circumradius `radius`.
pub fn octagon(center: FrenetPoint, radius: f64) -> Vec<FrenetPoint> {
    (0..8)
        .map(|i| {
            let a = PI / 8.0 + i as f64 * PI / 4.0;
            FrenetPoint::new(center.s + radius * a.cos(), center.d + radius * a.sin())
        })
        .collect()
}

/// Minimal convex polygon containing `points`.
///
/// A single point becomes an octagon of circumradius `pad_radius`; a
/// segment (two points or collinear input) becomes a hexagon that contains
/// the segment grown by `pad_radius` along and across it.
pub fn convex_hull(
    points: &[FrenetPoint],
    pad_radius: f64,
    sample_spacing: f64,
) -> ObstaclePolygon {
    assert!(!points.is_empty(), "convex_hull needs at least one point");
    let hull = hull_vertices(points);
    let vertices = match hull.len() {
        1 => octagon(hull[0], pad_radius),
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let len = (b.s - a.s).hypot(b.d - a.d);
            let e = Point2::new((b.s - a.s) / len, (b.d - a.d) / len) * pad_radius;
            let n = e.perp();
            let at = |p: FrenetPoint, v: Point2| FrenetPoint::new(p.s + v.x, p.d + v.y);
            // Counterclockwise around the segment, starting behind `a`.
            vec![
                at(a, -e),
                at(a, -n),
                at(b, -n),
                at(b, e),
                at(b, n),
                at(a, n),
            ]
        }
        _ => hull,
    };
    ObstaclePolygon::from_hull(vertices, sample_spacing)
}

/// Constant-velocity lateral prediction sampled at planning stations.
///
/// The obstacle centre moves in a straight Cartesian line for
/// `horizon_time` seconds. Wherever its projected station crosses
/// `s0 + k * step`, the interpolated lateral offset is recorded; stations
/// never reached are `None`. An obstacle without velocity reports its
/// current offset at the station it occupies.
pub fn predict_dynamic(
    o: &RawObstacle,
    n: usize,
    step: f64,
    s0: f64,
    horizon_time: f64,
    reference: &ReferencePath,
) -> Result<Vec<Option<f64>>, ObstacleError> {
    const DT: f64 = 0.05;
    let mut out = vec![None; n];
    let start = reference.cart_to_frenet(o.position)?;
    let station = |s: f64| ((s - s0) / step).floor();

    if o.speed() < 1e-9 {
        let k = station(start.s);
        if k >= 0.0 && (k as usize) < n {
            out[k as usize] = Some(start.d);
        }
        return Ok(out);
    }

    let samples = (horizon_time / DT).ceil().max(1.0) as usize;
    let mut prev = start;
    if let Some(k) = exact_station(start.s, s0, step, n) {
        out[k] = Some(start.d);
    }
    for i in 1..=samples {
        let t = (i as f64 * DT).min(horizon_time);
        let Ok(next) = reference.cart_to_frenet(o.position + o.velocity * t) else {
            break;
        };
        let (lo, hi) = if next.s >= prev.s {
            (prev.s, next.s)
        } else {
            (next.s, prev.s)
        };
        if hi > lo {
            let k_first = ((lo - s0) / step).ceil().max(0.0) as usize;
            let mut k = k_first;
            while k < n {
                let sk = s0 + k as f64 * step;
                if sk > hi {
                    break;
                }
                // Half-open in the direction of travel so shared endpoints count once.
                let at_prev = sk == prev.s;
                if !at_prev && out[k].is_none() {
                    let lambda = (sk - prev.s) / (next.s - prev.s);
                    out[k] = Some(prev.d + lambda * (next.d - prev.d));
                }
                k += 1;
            }
        }
        prev = next;
    }
    Ok(out)
}

fn exact_station(s: f64, s0: f64, step: f64, n: usize) -> Option<usize> {
    let k = (s - s0) / step;
    (k >= 0.0 && k.fract() == 0.0 && (k as usize) < n).then_some(k as usize)
}

/// Tunables for the data processor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessorConfig {
    pub margin_long: f64,
    pub margin_lat: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub pedestrian_radius: f64,
    pub sample_spacing: f64,
    /// Prediction horizon for moving obstacles (s).
    pub prediction_horizon: f64,
    /// Speeds below this are treated as static (m/s).
    pub dynamic_speed_threshold: f64,
}

impl Default for ProcessorConfig {
    fn default() -> Self {
        Self {
            margin_long: 0.5,
            margin_lat: 0.3,
            dbscan_eps: 1.5,
            dbscan_min_pts: 2,
            pedestrian_radius: 0.3,
            sample_spacing: 0.25,
            prediction_horizon: 4.0,
            dynamic_speed_threshold: 0.1,
        }
    }
}

/// Ego half extents added to obstacle outlines so corridor bounds apply to
/// the ego centroid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoFootprint {
    pub half_length: f64,
    pub half_width: f64,
}

/// Runs the full data-processing stage for one planning cycle.
///
/// `n`, `step` and `s0` describe the planning stations used for dynamic
/// predictions. Obstacles that cannot be projected onto the reference are
/// dropped, since they lie outside the planning domain.
pub fn process_obstacles(
    obstacles: &[RawObstacle],
    reference: &ReferencePath,
    config: &ProcessorConfig,
    ego: EgoFootprint,
    s0: f64,
    n: usize,
    step: f64,
) -> ObstacleSet {
    // Pedestrian padding is omnidirectional, so the ego extents fold into
    // it; vehicle boxes get an exact sum with the ego box instead.
    let margin_long = config.margin_long + ego.half_length;
    let margin_lat = config.margin_lat + ego.half_width;
    let mut polygons = Vec::new();
    let mut pedestrians = Vec::new();

    for o in obstacles {
        let moving = o.speed() >= config.dynamic_speed_threshold;
        let polygon = match o.kind {
            ObstacleKind::Vehicle => inflate_vehicle(
                o,
                config.margin_long,
                config.margin_lat,
                reference,
                config.sample_spacing,
            )
            .map(|p| grow_by_footprint(&p, ego, config.sample_spacing)),
            ObstacleKind::Pedestrian if moving => {
                pedestrian_polygon(&[o], reference, config, margin_long, margin_lat)
            }
            ObstacleKind::Pedestrian => {
                if let Ok(fp) = reference.cart_to_frenet(o.position) {
                    pedestrians.push((o, fp));
                }
                continue;
            }
        };
        let Ok(polygon) = polygon else { continue };
        if moving {
            let Ok(prediction) =
                predict_dynamic(o, n, step, s0, config.prediction_horizon, reference)
            else {
                continue;
            };
            polygons.push(polygon.with_prediction(prediction));
        } else {
            polygons.push(polygon);
        }
    }

    let positions: Vec<FrenetPoint> = pedestrians.iter().map(|(_, fp)| *fp).collect();
    let clustering = cluster_pedestrians(&positions, config.dbscan_eps, config.dbscan_min_pts);
    let groups = clustering
        .clusters
        .iter()
        .cloned()
        .chain(clustering.noise.iter().map(|&i| vec![i]));
    for group in groups {
        let members: Vec<&RawObstacle> = group.iter().map(|&i| pedestrians[i].0).collect();
        if let Ok(p) = pedestrian_polygon(&members, reference, config, margin_long, margin_lat) {
            polygons.push(p);
        }
    }
    ObstacleSet::new(polygons)
}

/// Hull of padded pedestrian positions. Each member contributes an octagon
/// stretched to the longitudinal and lateral padding, circumscribing the
/// padded ellipse.
fn pedestrian_polygon(
    members: &[&RawObstacle],
    reference: &ReferencePath,
    config: &ProcessorConfig,
    margin_long: f64,
    margin_lat: f64,
) -> Result<ObstaclePolygon, ObstacleError> {
    let grow = 1.0 / (PI / 8.0).cos();
    let rs = (config.pedestrian_radius + margin_long) * grow;
    let rd = (config.pedestrian_radius + margin_lat) * grow;
    let mut points = Vec::with_capacity(8 * members.len());
    for o in members {
        let c = reference.cart_to_frenet(o.position)?;
        points.extend(
            octagon(FrenetPoint::new(0.0, 0.0), 1.0)
                .into_iter()
                .map(|v| FrenetPoint::new(c.s + v.s * rs, c.d + v.d * rd)),
        );
    }
    let ids = members.iter().map(|o| o.id).collect();
    Ok(convex_hull(&points, config.pedestrian_radius, config.sample_spacing).with_ids(ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn straight() -> ReferencePath {
        ReferencePath::build(&[Point2::new(0.0, 0.0), Point2::new(200.0, 0.0)], 1.0).unwrap()
    }

    fn vehicle(x: f64, y: f64, yaw: f64) -> RawObstacle {
        RawObstacle {
            id: 0,
            kind: ObstacleKind::Vehicle,
            position: Point2::new(x, y),
            yaw,
            length: 4.0,
            width: 2.0,
            velocity: Point2::default(),
        }
    }

    #[test]
    fn aligned_vehicle_box() {
        let poly = inflate_vehicle(&vehicle(20.0, 1.0, 0.0), 0.5, 0.3, &straight(), 0.25).unwrap();
        let (s_lo, s_hi) = poly.s_range();
        let (d_lo, d_hi) = poly.d_range();
        assert!((s_lo - 17.5).abs() < 1e-9 && (s_hi - 22.5).abs() < 1e-9);
        assert!((d_lo + 0.3).abs() < 1e-9 && (d_hi - 2.3).abs() < 1e-9);
        assert_eq!(poly.vertices.len(), 4);
    }

    #[test]
    fn zero_margin_box_is_footprint() {
        let poly = inflate_vehicle(&vehicle(20.0, 1.0, 0.0), 0.0, 0.0, &straight(), 0.25).unwrap();
        assert_eq!(poly.s_range(), (18.0, 22.0));
        assert_eq!(poly.d_range(), (0.0, 2.0));
    }

    #[test]
    fn footprint_sum_adds_ego_extents_along_frenet_axes() {
        let ego = EgoFootprint {
            half_length: 2.25,
            half_width: 0.95,
        };
        let base = inflate_vehicle(&vehicle(50.0, 0.0, 0.3), 0.5, 0.3, &straight(), 0.25).unwrap();
        let grown = grow_by_footprint(&base, ego, 0.25);
        let ((s0, s1), (d0, d1)) = (base.s_range(), base.d_range());
        let ((g0, g1), (e0, e1)) = (grown.s_range(), grown.d_range());
        assert!((g0 - (s0 - 2.25)).abs() < 1e-12 && (g1 - (s1 + 2.25)).abs() < 1e-12);
        assert!((e0 - (d0 - 0.95)).abs() < 1e-12 && (e1 - (d1 + 0.95)).abs() < 1e-12);
        // Narrower than folding the ego length into the rotated margin.
        let folded =
            inflate_vehicle(&vehicle(50.0, 0.0, 0.3), 2.75, 1.25, &straight(), 0.25).unwrap();
        assert!(e1 < folded.d_range().1 - 0.3);
        assert_eq!(grown.ids, base.ids);
    }

    #[test]
    fn yawed_vehicle_extent() {
        let poly =
            inflate_vehicle(&vehicle(50.0, 0.0, FRAC_PI_4), 0.0, 0.0, &straight(), 0.25).unwrap();
        let (lo, hi) = poly.s_range();
        assert!((hi - lo - 6.0 / 2f64.sqrt()).abs() < 1e-9);
        let grown =
            inflate_vehicle(&vehicle(50.0, 0.0, FRAC_PI_4), 0.5, 0.3, &straight(), 0.25).unwrap();
        let (lo, hi) = grown.s_range();
        assert!((hi - lo - (5.0 + 2.6) / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn pedestrian_is_not_a_vehicle() {
        let mut o = vehicle(10.0, 0.0, 0.0);
        o.kind = ObstacleKind::Pedestrian;
        assert!(matches!(
            inflate_vehicle(&o, 0.5, 0.3, &straight(), 0.25),
            Err(ObstacleError::WrongKind { .. })
        ));
    }

    #[test]
    fn edge_samples_on_boundary_and_spaced() {
        let poly = inflate_vehicle(&vehicle(30.0, -2.0, 0.3), 0.5, 0.3, &straight(), 0.25).unwrap();
        for p in &poly.edge_samples {
            assert!(poly.containment_margin(*p).abs() < 1e-9);
        }
        // Samples walk the boundary in order, so cyclic neighbours are adjacent.
        let m = poly.edge_samples.len();
        for i in 0..m {
            let (a, b) = (poly.edge_samples[i], poly.edge_samples[(i + 1) % m]);
            assert!((b.s - a.s).hypot(b.d - a.d) <= 0.25 + 1e-9);
        }
    }

    #[test]
    fn dbscan_examples() {
        let tight = [
            FrenetPoint::new(10.0, 0.0),
            FrenetPoint::new(10.3, 0.2),
            FrenetPoint::new(10.1, 0.4),
        ];
        let c = cluster_pedestrians(&tight, 1.0, 2);
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].len(), 3);
        assert!(c.noise.is_empty());

        let single = cluster_pedestrians(&tight[..1], 1.0, 2);
        assert!(single.clusters.is_empty());
        assert_eq!(single.noise, vec![0]);

        let mut two_groups = tight.to_vec();
        two_groups.extend(tight.iter().map(|p| FrenetPoint::new(p.s + 10.0, p.d)));
        assert_eq!(cluster_pedestrians(&two_groups, 1.0, 2).clusters.len(), 2);

        assert_eq!(cluster_pedestrians(&[], 1.0, 2), Clustering::default());
    }

    #[test]
    fn hull_drops_interior_point() {
        let pts = [
            FrenetPoint::new(0.0, 0.0),
            FrenetPoint::new(1.0, 0.0),
            FrenetPoint::new(1.0, 1.0),
            FrenetPoint::new(0.0, 1.0),
            FrenetPoint::new(0.5, 0.5),
        ];
        let poly = convex_hull(&pts, 0.3, 0.25);
        assert_eq!(poly.vertices.len(), 4);
        assert!(!poly.vertices.contains(&FrenetPoint::new(0.5, 0.5)));
    }

    #[test]
    fn single_point_octagon() {
        let c = FrenetPoint::new(5.0, 1.0);
        let poly = convex_hull(&[c], 0.3, 0.25);
        assert_eq!(poly.vertices.len(), 8);
        for v in &poly.vertices {
            assert!(((v.s - c.s).hypot(v.d - c.d) - 0.3).abs() < 1e-12);
        }
        assert!(poly.containment_margin(c) > 0.0);
    }

    #[test]
    fn collinear_points_make_padded_hexagon() {
        let pts: Vec<_> = (0..5)
            .map(|i| FrenetPoint::new(i as f64, 0.5 * i as f64))
            .collect();
        let poly = convex_hull(&pts, 0.3, 0.25);
        assert_eq!(poly.vertices.len(), 6);
        for p in &pts {
            assert!(poly.containment_margin(*p) >= 0.3 * 0.7, "{p:?}");
        }
    }

    #[test]
    fn prediction_parallel_to_reference() {
        let mut o = vehicle(60.0, 3.0, PI);
        o.velocity = Point2::new(-8.0, 0.0);
        let pred = predict_dynamic(&o, 60, 1.0, 10.0, 4.0, &straight()).unwrap();
        let crossed: Vec<_> = pred
            .iter()
            .enumerate()
            .filter_map(|(k, d)| d.map(|d| (k, d)))
            .collect();
        // Starts at station 50 and sweeps 32 m back to station 18.
        assert_eq!(crossed.first().unwrap().0, 18);
        assert_eq!(crossed.last().unwrap().0, 50);
        assert!(crossed.iter().all(|&(_, d)| (d - 3.0).abs() < 1e-12));
    }

    #[test]
    fn prediction_stationary() {
        let o = vehicle(25.4, -1.0, 0.0);
        let pred = predict_dynamic(&o, 60, 1.0, 10.0, 4.0, &straight()).unwrap();
        assert_eq!(pred.iter().filter(|d| d.is_some()).count(), 1);
        assert_eq!(pred[15], Some(-1.0));
    }

    #[test]
    fn prediction_lateral_drift_is_linear() {
        let mut o = vehicle(30.0, 0.0, 0.0);
        o.velocity = Point2::new(5.0, 0.5);
        let pred = predict_dynamic(&o, 60, 1.0, 0.0, 4.0, &straight()).unwrap();
        // Crossing time of station k is (k - 30) / 5, so d = 0.5 (k - 30) / 5.
        let mut count = 0;
        for (k, d) in pred.iter().enumerate() {
            if let Some(d) = d {
                let expected = 0.1 * (k as f64 - 30.0);
                assert!((d - expected).abs() < 1e-9, "k={k} d={d}");
                count += 1;
            }
        }
        assert_eq!(count, 21);
    }
}
