//! Episode metrics.

use fcp_core::geometry::wrap_angle;
use serde::{Deserialize, Serialize};

use crate::episode::EpisodeLog;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean planning runtime (s).
    pub mean_runtime: f64,
    /// Largest yaw change between consecutive planned waypoints (rad).
    pub max_delta_yaw: f64,
    /// Mean yaw change between consecutive planned waypoints (rad).
    pub mean_delta_yaw: f64,
    /// Mean absolute lateral offset of the ego (m).
    pub mean_lateral: f64,
    /// Smallest ego-to-obstacle distance over the episode (m).
    pub min_distance: Option<f64>,
    /// Mean per-cycle nearest-obstacle distance (m).
    pub mean_distance: Option<f64>,
    pub passed: bool,
    pub cycles: usize,
}

/// Absolute yaw changes between consecutive waypoints.
pub fn yaw_changes(yaw: &[f64]) -> Vec<f64> {
    yaw.windows(2)
        .map(|w| wrap_angle(w[1] - w[0]).abs())
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn compute_metrics(log: &EpisodeLog) -> MetricsReport {
    let records = &log.records;
    let deltas: Vec<f64> = records.iter().flat_map(|r| yaw_changes(&r.yaw)).collect();
    let distances = || records.iter().filter_map(|r| r.nearest_distance);
    MetricsReport {
        mean_runtime: mean(records.iter().map(|r| r.runtime)).unwrap_or(0.0),
        max_delta_yaw: deltas.iter().copied().fold(0.0, f64::max),
        mean_delta_yaw: mean(deltas.iter().copied()).unwrap_or(0.0),
        mean_lateral: mean(records.iter().map(|r| r.ego.d.abs())).unwrap_or(0.0),
        min_distance: distances().reduce(f64::min),
        mean_distance: mean(distances()),
        passed: log.passed(),
        cycles: records.len(),
    }
}
