//! Closed-loop simulation harness for the Frenet corridor planner: scenarios,
//! episodes, an A* baseline, metrics, Monte Carlo and solve-time benchmarks.

pub mod astar;
pub mod bench;
pub mod episode;
pub mod io;
pub mod metrics;
pub mod montecarlo;
pub mod polygon;
pub mod scenario;

use fcp_core::frenet::FrenetError;

pub use astar::{astar_baseline, AStarConfig, AStarPath};
pub use bench::{bench_solves, BenchReport};
pub use episode::{
    plan_initial, run_episode, CycleRecord, EpisodeLog, Outcome, PlannerKind, YieldRule,
};
pub use metrics::{compute_metrics, MetricsReport};
pub use montecarlo::{monte_carlo, MonteCarloReport};
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no path through the corridor")]
    NoPath,
    #[error(transparent)]
    Frenet(#[from] FrenetError),
}
