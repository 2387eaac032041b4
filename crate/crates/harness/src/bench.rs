//! Cold-start solve-time benchmark over randomized obstacle layouts.

use std::time::Instant;

use fcp_core::optimizer::SolveStatus;
use fcp_core::pipeline::{CycleInput, FrenetCorridorPlanner};
use serde::{Deserialize, Serialize};

use crate::montecarlo::trial_setup;
use crate::scenario::Scenario;
use crate::HarnessError;

/// Histogram bin width (s).
pub const BIN_WIDTH: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub run: usize,
    /// Layout index the sample was drawn from.
    pub layout: usize,
    /// Wall time of one full planning cycle (s).
    pub runtime: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Lower edge (s).
    pub bin: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: usize,
    /// Layouts skipped because no corridor could be built.
    pub skipped: usize,
    pub mean: f64,
    pub max: f64,
    pub infeasible: usize,
    pub samples: Vec<BenchSample>,
}

impl BenchReport {
    pub fn histogram(&self) -> Vec<HistogramBin> {
        let bins = (self.max / BIN_WIDTH).floor() as usize + 1;
        let mut counts = vec![0usize; bins];
        for s in &self.samples {
            counts[((s.runtime / BIN_WIDTH).floor() as usize).min(bins - 1)] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                bin: i as f64 * BIN_WIDTH,
                count,
            })
            .collect()
    }
}

/// Times `runs` cold planning cycles from the scenario's initial ego state,
/// each on a fresh randomized obstacle layout. Layouts where the ego cannot
/// pass at all are skipped and replaced.
pub fn bench_solves(sc: &Scenario, runs: usize, seed: u64) -> Result<BenchReport, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::InvalidScenario("runs must be >= 1".into()));
    }
    sc.validate()?;
    let reference = sc.reference_path()?;
    let config = sc.planner_config()?;
    let mut samples = Vec::with_capacity(runs);
    let mut skipped = 0;
    let mut layout = 0;
    while samples.len() < runs {
        if skipped > 10 * runs {
            return Err(HarnessError::InvalidScenario(
                "too many randomized layouts leave no passable corridor".into(),
            ));
        }
        let (trial, _) = trial_setup(sc, seed, layout)?;
        layout += 1;
        let obstacles: Vec<_> = trial.obstacles.iter().map(|o| o.at(0.0)).collect();
        let input = CycleInput {
            reference: &reference,
            road_lb: sc.road.lower,
            road_ub: sc.road.upper,
            ego: sc.ego_state(),
            obstacles: &obstacles,
        };
        let mut planner = FrenetCorridorPlanner::new(config.clone());
        let started = Instant::now();
        let solved = planner
            .prepare(&input)
            .ok()
            .and_then(|prepared| planner.optimize(&prepared, &input.ego).ok());
        let runtime = started.elapsed().as_secs_f64();
        match solved {
            Some(sol) => samples.push(BenchSample {
                run: samples.len(),
                layout: layout - 1,
                runtime,
                iterations: sol.iterations,
                status: sol.status,
            }),
            None => skipped += 1,
        }
    }
    let mean = samples.iter().map(|s| s.runtime).sum::<f64>() / runs as f64;
    let max = samples.iter().map(|s| s.runtime).fold(0.0, f64::max);
    let infeasible = samples
        .iter()
        .filter(|s| s.status == SolveStatus::Infeasible)
        .count();
    Ok(BenchReport {
        runs,
        skipped,
        mean,
        max,
        infeasible,
        samples,
    })
}
