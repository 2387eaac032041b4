//! Convex polygons in the Cartesian plane for collision and clearance audits.

use fcp_core::geometry::{point_segment_distance, Point2};

/// Convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
}

impl Polygon {
    /// Oriented rectangle centred at `center`.
    pub fn rectangle(center: Point2, yaw: f64, length: f64, width: f64) -> Self {
        let fwd = Point2::from_angle(yaw);
        let left = fwd.perp();
        let (hl, hw) = (0.5 * length, 0.5 * width);
        Self {
            vertices: vec![
                center - fwd * hl - left * hw,
                center + fwd * hl - left * hw,
                center + fwd * hl + left * hw,
                center - fwd * hl + left * hw,
            ],
        }
    }

    fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn projection(&self, axis: Point2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| v.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p), hi.max(p))
            })
    }

    /// Separating-axis test; touching polygons intersect.
    pub fn intersects(&self, other: &Polygon) -> bool {
        for (a, b) in self.edges().chain(other.edges()) {
            let axis = (b - a).perp();
            let (p0, p1) = self.projection(axis);
            let (q0, q1) = other.projection(axis);
            if p1 < q0 || q1 < p0 {
                return false;
            }
        }
        true
    }

    /// Euclidean distance between the polygons; zero when they intersect.
    pub fn distance(&self, other: &Polygon) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        let one_way = |a: &Polygon, b: &Polygon| {
            a.vertices
                .iter()
                .flat_map(|&v| b.edges().map(move |(p, q)| point_segment_distance(v, p, q)))
                .fold(f64::INFINITY, f64::min)
        };
        one_way(self, other).min(one_way(other, self))
    }
}
