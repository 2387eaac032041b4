//! Seeded Monte Carlo over randomized obstacle poses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, Outcome, PlannerKind};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::scenario::Scenario;
use crate::HarnessError;

/// Per-trial RNG stream split from the master seed.
fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Scenario of one trial and the seed of its perception noise.
pub fn trial_setup(
    sc: &Scenario,
    seed: u64,
    trial: usize,
) -> Result<(Scenario, u64), HarnessError> {
    let mut rng = trial_rng(seed, trial);
    let randomized = sc.randomized(&mut rng)?;
    Ok((randomized, rng.gen()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub passed: bool,
    pub collision: bool,
    pub road_exit: bool,
    pub aborted: Option<String>,
    pub cycles: usize,
    pub max_delta_yaw: f64,
    pub mean_delta_yaw: f64,
    pub mean_lateral: f64,
    pub min_distance: Option<f64>,
    pub mean_distance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

/// Deterministic aggregate; wall-clock figures are reported separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub trials: usize,
    pub passed: usize,
    pub collisions: usize,
    pub road_exits: usize,
    pub aborted: usize,
    pub max_delta_yaw: Option<Summary>,
    pub mean_delta_yaw: Option<Summary>,
    pub mean_lateral: Option<Summary>,
    pub min_distance: Option<Summary>,
    pub mean_distance: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSummary {
    pub trials: usize,
    /// Mean over trials of the per-episode mean planning time (s).
    pub mean_runtime: f64,
    pub per_trial: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MonteCarloReport {
    pub aggregate: Aggregate,
    pub trials: Vec<TrialResult>,
    pub runtime: RuntimeSummary,
}

fn run_trial(
    sc: &Scenario,
    planner: PlannerKind,
    seed: u64,
    trial: usize,
) -> Result<(TrialResult, MetricsReport), HarnessError> {
    let (scenario, trial_seed) = trial_setup(sc, seed, trial)?;
    let log = run_episode(&scenario, planner, trial_seed)?;
    let m = compute_metrics(&log);
    let aborted = match &log.outcome {
        Outcome::Completed => None,
        Outcome::Aborted { cause } => Some(cause.clone()),
    };
    let result = TrialResult {
        trial,
        seed: trial_seed,
        passed: m.passed,
        collision: log.collision,
        road_exit: log.road_exit,
        aborted,
        cycles: m.cycles,
        max_delta_yaw: m.max_delta_yaw,
        mean_delta_yaw: m.mean_delta_yaw,
        mean_lateral: m.mean_lateral,
        min_distance: m.min_distance,
        mean_distance: m.mean_distance,
    };
    Ok((result, m))
}

/// Runs `trials` randomized episodes. Results do not depend on `parallel`.
pub fn monte_carlo(
    sc: &Scenario,
    planner: PlannerKind,
    trials: usize,
    seed: u64,
    parallel: bool,
) -> Result<MonteCarloReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::InvalidScenario("trials must be >= 1".into()));
    }
    sc.validate()?;
    let results: Vec<(TrialResult, MetricsReport)> = if parallel {
        (0..trials)
            .into_par_iter()
            .map(|t| run_trial(sc, planner, seed, t))
            .collect::<Result<_, _>>()?
    } else {
        (0..trials)
            .map(|t| run_trial(sc, planner, seed, t))
            .collect::<Result<_, _>>()?
    };

    let col = |f: &dyn Fn(&TrialResult) -> Option<f64>| -> Option<Summary> {
        let v: Vec<f64> = results.iter().filter_map(|(r, _)| f(r)).collect();
        Summary::of(&v)
    };
    let aggregate = Aggregate {
        scenario: sc.name.clone(),
        planner,
        seed,
        trials,
        passed: results.iter().filter(|(r, _)| r.passed).count(),
        collisions: results.iter().filter(|(r, _)| r.collision).count(),
        road_exits: results.iter().filter(|(r, _)| r.road_exit).count(),
        aborted: results.iter().filter(|(r, _)| r.aborted.is_some()).count(),
        max_delta_yaw: col(&|r| Some(r.max_delta_yaw)),
        mean_delta_yaw: col(&|r| Some(r.mean_delta_yaw)),
        mean_lateral: col(&|r| Some(r.mean_lateral)),
        min_distance: col(&|r| r.min_distance),
        mean_distance: col(&|r| r.mean_distance),
    };
    let per_trial: Vec<f64> = results.iter().map(|(_, m)| m.mean_runtime).collect();
    let runtime = RuntimeSummary {
        trials,
        mean_runtime: per_trial.iter().sum::<f64>() / trials as f64,
        per_trial,
    };
    Ok(MonteCarloReport {
        aggregate,
        trials: results.into_iter().map(|(r, _)| r).collect(),
        runtime,
    })
}
