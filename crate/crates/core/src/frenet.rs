//! Reference path representation and Cartesian/Frenet transforms.
//!
//! The reference is stored as a uniformly resampled polyline. Headings are
//! estimated by central differences at the samples and interpolated linearly
//! in arc length, which gives a continuous normal field along the path. The
//! Frenet map is `F(s, d) = r(s) + d * n(s)` with `r` piecewise linear and
//! `n` the left normal of the interpolated heading; `cart_to_frenet` inverts
//! that exact map, so round trips are limited only by root-finding precision.
//!
//! Lateral offsets are positive to the left of the direction of travel.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_segment_distance, wrap_angle, Point2};

/// Upper bound on the internal resampling spacing (m).
pub const MAX_RESAMPLE_SPACING: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrenetError {
    #[error("degenerate reference: {0}")]
    DegenerateReference(String),
    #[error("reference heading jumps by {jump:.3} rad at sample {index}")]
    KinkedReference { index: usize, jump: f64 },
    #[error("point outside reference extent (s = {s:.3}, length = {length:.3})")]
    OutOfDomain { s: f64, length: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrenetPoint {
    pub s: f64,
    pub d: f64,
}

impl FrenetPoint {
    pub const fn new(s: f64, d: f64) -> Self {
        Self { s, d }
    }
}

/// Arc-length parameterized global route.
#[derive(Clone, Debug)]
pub struct ReferencePath {
    waypoints: Vec<Point2>,
    cum_arclength: Vec<f64>,
    /// Unwrapped tangent angle per waypoint.
    heading: Vec<f64>,
    /// Planning step used for `heading_delta`.
    step: f64,
    heading_delta: Vec<f64>,
    max_segment: f64,
}

impl ReferencePath {
    /// Builds a reference from raw waypoints, resampling at
    /// `min(0.5, step / 2)` and precomputing per-step heading changes at
    /// spacing `step`.
    pub fn build(waypoints: &[Point2], step: f64) -> Result<Self, FrenetError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(FrenetError::DegenerateReference(format!(
                "planning step must be positive, got {step}"
            )));
        }
        let mut raw: Vec<Point2> = Vec::with_capacity(waypoints.len());
        for &p in waypoints {
            if !p.is_finite() {
                return Err(FrenetError::DegenerateReference(
                    "non-finite waypoint".into(),
                ));
            }
            if raw.last().is_none_or(|&q: &Point2| q.distance(p) > 1e-12) {
                raw.push(p);
            }
        }
        if raw.len() < 2 {
            return Err(FrenetError::DegenerateReference(
                "fewer than two distinct waypoints".into(),
            ));
        }

        let mut raw_cum = vec![0.0; raw.len()];
        for i in 1..raw.len() {
            raw_cum[i] = raw_cum[i - 1] + raw[i - 1].distance(raw[i]);
        }
        let raw_len = *raw_cum.last().unwrap();
        if raw_len < step {
            return Err(FrenetError::DegenerateReference(format!(
                "total length {raw_len:.3} m shorter than step {step} m"
            )));
        }

        let spacing = MAX_RESAMPLE_SPACING.min(step / 2.0);
        let segments = (raw_len / spacing).ceil() as usize;
        let mut pts = Vec::with_capacity(segments + 1);
        let mut seg = 0usize;
        for j in 0..=segments {
            let target = raw_len * j as f64 / segments as f64;
            while seg + 2 < raw.len() && raw_cum[seg + 1] < target {
                seg += 1;
            }
            let span = raw_cum[seg + 1] - raw_cum[seg];
            let t = ((target - raw_cum[seg]) / span).clamp(0.0, 1.0);
            pts.push(raw[seg].lerp(raw[seg + 1], t));
        }

        let mut cum = vec![0.0; pts.len()];
        let mut max_segment: f64 = 0.0;
        for i in 1..pts.len() {
            let len = pts[i - 1].distance(pts[i]);
            if len <= 1e-12 {
                return Err(FrenetError::DegenerateReference(
                    "resampling produced coincident points".into(),
                ));
            }
            max_segment = max_segment.max(len);
            cum[i] = cum[i - 1] + len;
        }

        let n = pts.len();
        let mut heading = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = match i {
                0 => (pts[0], pts[1]),
                _ if i == n - 1 => (pts[n - 2], pts[n - 1]),
                _ => (pts[i - 1], pts[i + 1]),
            };
            let raw_heading = (b.y - a.y).atan2(b.x - a.x);
            let unwrapped = match heading.last() {
                None => raw_heading,
                Some(&prev) => prev + wrap_angle(raw_heading - prev),
            };
            heading.push(unwrapped);
        }
        for i in 1..n {
            let jump = (heading[i] - heading[i - 1]).abs();
            if jump >= FRAC_PI_2 {
                return Err(FrenetError::KinkedReference { index: i, jump });
            }
        }

        let mut path = Self {
            waypoints: pts,
            cum_arclength: cum,
            heading,
            step,
            heading_delta: Vec::new(),
            max_segment,
        };
        let count = (path.length() / step).floor() as usize;
        path.heading_delta = path.heading_deltas(0.0, count)?;
        Ok(path)
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn cum_arclength(&self) -> &[f64] {
        &self.cum_arclength
    }

    /// Unwrapped per-waypoint heading (rad).
    pub fn heading(&self) -> &[f64] {
        &self.heading
    }

    /// Heading change per planning step starting at `s = 0`.
    pub fn heading_delta(&self) -> &[f64] {
        &self.heading_delta
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn length(&self) -> f64 {
        *self.cum_arclength.last().unwrap()
    }

    /// Largest absolute curvature of the interpolated heading field (1/m).
    pub fn max_curvature(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| self.segment(i).curvature.abs())
            .fold(0.0, f64::max)
    }

    fn segment_count(&self) -> usize {
        self.waypoints.len() - 1
    }

    fn segment(&self, i: usize) -> Segment {
        let start = self.waypoints[i];
        let end = self.waypoints[i + 1];
        let len = self.cum_arclength[i + 1] - self.cum_arclength[i];
        Segment {
            start,
            dir: (end - start) * (1.0 / len),
            len,
            s0: self.cum_arclength[i],
            theta0: self.heading[i],
            curvature: (self.heading[i + 1] - self.heading[i]) / len,
        }
    }

    fn segment_at(&self, s: f64) -> usize {
        let idx = self.cum_arclength.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(self.segment_count() - 1)
    }

    fn check_domain(&self, s: f64) -> Result<(), FrenetError> {
        let length = self.length();
        if !(-1e-9..=length + 1e-9).contains(&s) {
            return Err(FrenetError::OutOfDomain { s, length });
        }
        Ok(())
    }

    /// Interpolated (unwrapped) heading at arc length `s`.
    pub fn heading_at(&self, s: f64) -> Result<f64, FrenetError> {
        self.check_domain(s)?;
        let seg = self.segment(self.segment_at(s));
        Ok(seg.theta0 + seg.curvature * (s - seg.s0))
    }

    /// Point on the reference at arc length `s`.
    pub fn position_at(&self, s: f64) -> Result<Point2, FrenetError> {
        self.frenet_to_cart(FrenetPoint::new(s, 0.0))
    }

    /// `n` heading changes `heading(s0 + (k+1) step) - heading(s0 + k step)`.
    pub fn heading_deltas(&self, s0: f64, n: usize) -> Result<Vec<f64>, FrenetError> {
        let mut prev = self.heading_at(s0)?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let s = s0 + (k + 1) as f64 * self.step;
            self.check_domain(s)?;
            let next = self.heading_at(s.min(self.length()))?;
            out.push(next - prev);
            prev = next;
        }
        Ok(out)
    }

    /// Projects a Cartesian point onto the reference.
    pub fn cart_to_frenet(&self, p: Point2) -> Result<FrenetPoint, FrenetError> {
        let count = self.segment_count();
        let mut nearest = f64::INFINITY;
        for i in 0..count {
            let dist = point_segment_distance(p, self.waypoints[i], self.waypoints[i + 1]);
            nearest = nearest.min(dist);
        }
        let window = nearest + 2.0 * self.max_segment;

        // (|d|, s, d)
        let mut best: Option<(f64, f64, f64)> = None;
        let mut consider = |abs_d: f64, s: f64, d: f64| match best {
            Some((bd, bs, _)) if abs_d > bd + 1e-12 || (abs_d >= bd - 1e-12 && s >= bs) => {}
            _ => best = Some((abs_d, s, d)),
        };
        for i in 0..count {
            let dist = point_segment_distance(p, self.waypoints[i], self.waypoints[i + 1]);
            if dist > window {
                continue;
            }
            let seg = self.segment(i);
            if let Some(sigma) = seg.foot(p) {
                let offset = p - seg.point(sigma);
                let d = offset.dot(Point2::from_angle(seg.theta(sigma)).perp());
                consider(d.abs(), seg.s0 + sigma, d);
            }
        }

        let first = self.segment(0);
        let last = self.segment(count - 1);
        let start_tangent = Point2::from_angle(first.theta0);
        let end_theta = last.theta(last.len);
        let end_tangent = Point2::from_angle(end_theta);
        let start_overshoot = -(p - first.start).dot(start_tangent);
        let end_point = last.point(last.len);
        let end_overshoot = (p - end_point).dot(end_tangent);

        // An endpoint is only the projection when no interior foot is closer.
        let mut endpoint: Option<(f64, f64, f64, f64)> = None; // (dist, s, d, overshoot)
        if start_overshoot > 0.0 {
            let d = (p - first.start).dot(start_tangent.perp());
            endpoint = Some((p.distance(first.start), 0.0, d, start_overshoot));
        }
        if end_overshoot > 0.0 {
            let dist = p.distance(end_point);
            if endpoint.is_none_or(|(ed, ..)| dist < ed) {
                let d = (p - end_point).dot(end_tangent.perp());
                endpoint = Some((dist, self.length(), d, end_overshoot));
            }
        }
        match (best, endpoint) {
            (Some((abs_d, s, d)), ep) if ep.is_none_or(|(ed, ..)| abs_d <= ed) => {
                Ok(FrenetPoint::new(s, d))
            }
            (_, Some((_, s, d, overshoot))) => {
                if overshoot > self.step {
                    Err(FrenetError::OutOfDomain {
                        s: if s == 0.0 { -overshoot } else { s + overshoot },
                        length: self.length(),
                    })
                } else {
                    Ok(FrenetPoint::new(s, d))
                }
            }
            (None, None) => Err(FrenetError::OutOfDomain {
                s: f64::NAN,
                length: self.length(),
            }),
            (Some(_), None) => unreachable!(),
        }
    }

    /// Maps a Frenet point back to Cartesian coordinates.
    pub fn frenet_to_cart(&self, fp: FrenetPoint) -> Result<Point2, FrenetError> {
        self.check_domain(fp.s)?;
        let s = fp.s.clamp(0.0, self.length());
        let seg = self.segment(self.segment_at(s));
        let sigma = s - seg.s0;
        let normal = Point2::from_angle(seg.theta(sigma)).perp();
        Ok(seg.point(sigma) + normal * fp.d)
    }
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    start: Point2,
    dir: Point2,
    len: f64,
    s0: f64,
    theta0: f64,
    curvature: f64,
}

impl Segment {
    fn point(&self, sigma: f64) -> Point2 {
        self.start + self.dir * sigma
    }

    fn theta(&self, sigma: f64) -> f64 {
        self.theta0 + self.curvature * sigma
    }

    /// Residual `(p - r(sigma)) . t(sigma)`; its root is the Frenet foot.
    fn residual(&self, p: Point2, sigma: f64) -> (f64, f64) {
        let q = p - self.point(sigma);
        let tangent = Point2::from_angle(self.theta(sigma));
        let value = q.dot(tangent);
        let slope = -self.dir.dot(tangent) + self.curvature * q.dot(tangent.perp());
        (value, slope)
    }

    /// Root of the residual inside `[0, len]`, if the residual brackets one.
    fn foot(&self, p: Point2) -> Option<f64> {
        let (g_lo, _) = self.residual(p, 0.0);
        let (g_hi, _) = self.residual(p, self.len);
        if g_lo == 0.0 {
            return Some(0.0);
        }
        if g_hi == 0.0 {
            return Some(self.len);
        }
        if g_lo.signum() == g_hi.signum() {
            return None;
        }
        // Safeguarded Newton on a bracket.
        let (mut lo, mut hi) = (0.0, self.len);
        let lo_positive = g_lo > 0.0;
        let mut sigma = ((p - self.start).dot(self.dir)).clamp(0.0, self.len);
        for _ in 0..60 {
            let (g, slope) = self.residual(p, sigma);
            if g == 0.0 {
                return Some(sigma);
            }
            if (g > 0.0) == lo_positive {
                lo = sigma;
            } else {
                hi = sigma;
            }
            let mut next = if slope != 0.0 {
                sigma - g / slope
            } else {
                f64::NAN
            };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - sigma).abs() < 1e-14 || hi - lo < 1e-14 {
                return Some(next);
            }
            sigma = next;
        }
        Some(sigma)
    }
}
