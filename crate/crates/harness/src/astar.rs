//! Grid A* baseline over corridor cells.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use fcp_core::boundary::Corridor;
use fcp_core::frenet::FrenetPoint;
use fcp_core::optimizer::SpaceState;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AStarConfig {
    /// Lateral cell size (m).
    pub lateral_resolution: f64,
    /// Extra cost per metre of travel per metre of offset.
    pub deviation_weight: f64,
}

impl Default for AStarConfig {
    fn default() -> Self {
        Self {
            lateral_resolution: 0.25,
            deviation_weight: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AStarPath {
    /// One waypoint per station.
    pub waypoints: Vec<FrenetPoint>,
    pub expanded: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path over cells `(k, j)` at station `k` and offset
/// `j * lateral_resolution`, restricted to cells inside the corridor.
///
/// Moves go one station forward (straight or diagonal) or one level
/// sideways within a station. Edge cost is the Euclidean length plus
/// `deviation_weight * |d| * length` at the destination; the heuristic is
/// the remaining forward distance. The result keeps the last cell visited
/// in each station.
pub fn astar_baseline(
    corridor: &Corridor,
    init: SpaceState,
    config: &AStarConfig,
) -> Result<AStarPath, HarnessError> {
    let n = corridor.len();
    let res = config.lateral_resolution;
    let step = corridor.step;
    let lo = corridor.d_lb.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corridor
        .d_ub
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let j_min = (lo / res).ceil() as i64;
    let j_max = (hi / res).floor() as i64;
    if n < 2 || j_max < j_min {
        return Err(HarnessError::NoPath);
    }
    let levels = (j_max - j_min + 1) as usize;
    let offset = |j: usize| (j as i64 + j_min) as f64 * res;
    let valid = |k: usize, j: usize| {
        let d = offset(j);
        d >= corridor.d_lb[k] && d <= corridor.d_ub[k]
    };
    let index = |k: usize, j: usize| k * levels + j;

    let start_j = (0..levels)
        .filter(|&j| valid(0, j))
        .min_by(|&a, &b| {
            (offset(a) - init.d)
                .abs()
                .total_cmp(&(offset(b) - init.d).abs())
        })
        .ok_or(HarnessError::NoPath)?;

    let total = n * levels;
    let mut best = vec![f64::INFINITY; total];
    let mut parent = vec![usize::MAX; total];
    let mut closed = vec![false; total];
    let mut heap = BinaryHeap::new();
    let heuristic = |k: usize| (n - 1 - k) as f64 * step;
    let start = index(0, start_j);
    best[start] = 0.0;
    heap.push(Open {
        f: heuristic(0),
        g: 0.0,
        node: start,
    });

    let mut expanded = 0;
    let mut goal = None;
    while let Some(Open { g, node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        expanded += 1;
        let (k, j) = (node / levels, node % levels);
        if k == n - 1 {
            goal = Some(node);
            break;
        }
        let moves: [(usize, i64); 5] = [(1, -1), (1, 0), (1, 1), (0, -1), (0, 1)];
        for (dk, dj) in moves {
            let nj = j as i64 + dj;
            if nj < 0 || nj >= levels as i64 {
                continue;
            }
            let (nk, nj) = (k + dk, nj as usize);
            if !valid(nk, nj) {
                continue;
            }
            let next = index(nk, nj);
            if closed[next] {
                continue;
            }
            let fwd = dk as f64 * step;
            let lat = dj as f64 * res;
            let length = (fwd * fwd + lat * lat).sqrt();
            let cost = g + length + config.deviation_weight * offset(nj).abs() * length;
            if cost < best[next] {
                best[next] = cost;
                parent[next] = node;
                heap.push(Open {
                    f: cost + heuristic(nk),
                    g: cost,
                    node: next,
                });
            }
        }
    }

    let goal = goal.ok_or(HarnessError::NoPath)?;
    let mut chain = vec![goal];
    while let Some(&last) = chain.last() {
        if parent[last] == usize::MAX {
            break;
        }
        chain.push(parent[last]);
    }
    chain.reverse();
    let mut waypoints = vec![FrenetPoint::default(); n];
    for node in chain {
        let (k, j) = (node / levels, node % levels);
        waypoints[k] = FrenetPoint::new(corridor.station(k), offset(j));
    }
    waypoints[0].d = init.d;
    Ok(AStarPath {
        waypoints,
        expanded,
    })
}
