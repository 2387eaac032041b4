//! Boundary generation: one pass over obstacle boundary points producing
//! per-station lateral bounds of the drivable corridor.

use serde::Serialize;

use crate::obstacles::ObstaclePolygon;

/// Lateral bounds for `n` stations `s0 + k * step`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corridor {
    pub s0: f64,
    pub step: f64,
    pub d_lb: Vec<f64>,
    pub d_ub: Vec<f64>,
    pub road_lb: f64,
    pub road_ub: f64,
}

/// One row of the plotting export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorridorRow {
    pub k: usize,
    pub s: f64,
    pub d_lb: f64,
    pub d_ub: f64,
}

impl Corridor {
    /// Corridor bounded by the road limits only.
    pub fn open(road_lb: f64, road_ub: f64, n: usize, step: f64, s0: f64) -> Self {
        Self {
            s0,
            step,
            d_lb: vec![road_lb; n],
            d_ub: vec![road_ub; n],
            road_lb,
            road_ub,
        }
    }

    pub fn len(&self) -> usize {
        self.d_lb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_lb.is_empty()
    }

    pub fn station(&self, k: usize) -> f64 {
        self.s0 + k as f64 * self.step
    }

    pub fn midline(&self, k: usize) -> f64 {
        0.5 * (self.d_lb[k] + self.d_ub[k])
    }

    /// True when an obstacle moved either bound away from the road limit.
    pub fn is_tightened(&self, k: usize) -> bool {
        self.d_lb[k] > self.road_lb || self.d_ub[k] < self.road_ub
    }

    /// Every station leaves at least `ego_width` between the bounds.
    pub fn is_feasible(&self, ego_width: f64) -> bool {
        self.d_lb
            .iter()
            .zip(&self.d_ub)
            .all(|(lb, ub)| lb + ego_width <= *ub)
    }

    pub fn rows(&self) -> Vec<CorridorRow> {
        (0..self.len())
            .map(|k| CorridorRow {
                k,
                s: self.station(k),
                d_lb: self.d_lb[k],
                d_ub: self.d_ub[k],
            })
            .collect()
    }
}

/// Work counters for complexity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoundaryStats {
    pub points_visited: usize,
}

/// Builds corridor bounds from the classified obstacle sets.
///
/// Bounds start at the road limits. Each boundary point is binned at
/// `floor((s - s0) / step)`; points of lower-set obstacles raise `d_lb` in
/// their cell and the next one, points of upper-set obstacles lower `d_ub`
/// likewise. Cells outside `0..n` are skipped.
pub fn generate_bounds<'a>(
    lb_set: impl IntoIterator<Item = &'a ObstaclePolygon>,
    ub_set: impl IntoIterator<Item = &'a ObstaclePolygon>,
    l_lb: f64,
    l_ub: f64,
    n: usize,
    step: f64,
    s0: f64,
) -> Corridor {
    generate_bounds_counted(lb_set, ub_set, l_lb, l_ub, n, step, s0).0
}

pub fn generate_bounds_counted<'a>(
    lb_set: impl IntoIterator<Item = &'a ObstaclePolygon>,
    ub_set: impl IntoIterator<Item = &'a ObstaclePolygon>,
    l_lb: f64,
    l_ub: f64,
    n: usize,
    step: f64,
    s0: f64,
) -> (Corridor, BoundaryStats) {
    assert!(
        step > 0.0 && n >= 2 && l_lb < l_ub,
        "invalid corridor parameters"
    );
    let mut corridor = Corridor::open(l_lb, l_ub, n, step, s0);
    let mut stats = BoundaryStats::default();

    let cell = |s: f64| -> Option<usize> {
        let ind = ((s - s0) / step).floor();
        (ind >= 0.0 && ind < n as f64).then_some(ind as usize)
    };

    for obstacle in lb_set {
        for p in &obstacle.edge_samples {
            stats.points_visited += 1;
            let Some(ind) = cell(p.s) else { continue };
            let bounds = &mut corridor.d_lb;
            if bounds[ind] < p.d {
                bounds[ind] = p.d;
            }
            // Obstacle corners handling.
            if ind + 1 < n && bounds[ind + 1] < p.d {
                bounds[ind + 1] = p.d;
            }
        }
    }
    for obstacle in ub_set {
        for p in &obstacle.edge_samples {
            stats.points_visited += 1;
            let Some(ind) = cell(p.s) else { continue };
            let bounds = &mut corridor.d_ub;
            if bounds[ind] > p.d {
                bounds[ind] = p.d;
            }
            if ind + 1 < n && bounds[ind + 1] > p.d {
                bounds[ind + 1] = p.d;
            }
        }
    }
    (corridor, stats)
}
