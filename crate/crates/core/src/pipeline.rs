//! One planning cycle: obstacle processing, deviation decisions, corridor
//! generation and path optimization, with state carried between cycles.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{generate_bounds, Corridor};
use crate::frenet::ReferencePath;
use crate::governor::{DecisionGovernor, GovernorConfig, GovernorError, Partition};
use crate::obstacles::{
    process_obstacles, EgoFootprint, ObstacleSet, ProcessorConfig, RawObstacle,
};
use crate::optimizer::{
    curvature_bounds, solve, PathProblem, PlanError, PlannerSolution, PlannerWeights, Prediction,
    SolveStatus, SpaceState, UnknownParameter, WarmStart,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub processor: ProcessorConfig,
    pub governor: GovernorConfig,
    pub weights: PlannerWeights,
}

impl PlannerConfig {
    /// Sets a flat parameter: any [`PlannerWeights`] key, a governor key
    /// (`clearance`, `hysteresis`, `risk_mode`) or a processor key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), UnknownParameter> {
        let p = &mut self.processor;
        let g = &mut self.governor;
        match key {
            "clearance" => g.clearance = value,
            "hysteresis" => g.hysteresis = value,
            "risk_mode" => g.risk_mode = value != 0.0,
            "margin_long" => p.margin_long = value,
            "margin_lat" => p.margin_lat = value,
            "dbscan_eps" => p.dbscan_eps = value,
            "dbscan_min_pts" => p.dbscan_min_pts = value.max(0.0).round() as usize,
            "pedestrian_radius" => p.pedestrian_radius = value,
            "sample_spacing" => p.sample_spacing = value,
            "prediction_horizon" => p.prediction_horizon = value,
            "dynamic_speed_threshold" => p.dynamic_speed_threshold = value,
            _ => return self.weights.set(key, value),
        }
        Ok(())
    }
}

/// Ego pose in the Frenet frame plus its footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub s: f64,
    pub d: f64,
    /// Heading relative to the reference tangent (rad).
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl EgoState {
    pub fn space_state(&self) -> SpaceState {
        SpaceState::new(self.s, self.d, self.heading)
    }

    pub fn footprint(&self) -> EgoFootprint {
        EgoFootprint {
            half_length: 0.5 * self.length,
            half_width: 0.5 * self.width,
        }
    }
}

pub struct CycleInput<'a> {
    pub reference: &'a ReferencePath,
    /// Road limits for the vehicle body (m).
    pub road_lb: f64,
    pub road_ub: f64,
    pub ego: EgoState,
    pub obstacles: &'a [RawObstacle],
}

/// Upstream products shared by every path planner.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub obstacles: ObstacleSet,
    pub partition: Partition,
    /// Bounds on the ego centroid.
    pub corridor: Corridor,
    pub predictions: Vec<Prediction>,
    pub control_bounds: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct CycleOutput {
    pub prepared: Prepared,
    pub solution: PlannerSolution,
    /// Wall time of the whole cycle (s).
    pub runtime: f64,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no passable gap: {0}")]
    Blocked(#[from] GovernorError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("corridor road limits leave no room for the ego ({lower:.3} >= {upper:.3})")]
    NarrowRoad { lower: f64, upper: f64 },
    #[error("corridor violated by {:.3} m, beyond the slack cap", .0.solution.max_violation)]
    Infeasible(Box<CycleOutput>),
}

/// Stateful planner: keeps governor memory and the optimizer warm start
/// across cycles.
#[derive(Clone, Debug)]
pub struct FrenetCorridorPlanner {
    pub config: PlannerConfig,
    governor: DecisionGovernor,
    warm: Option<(f64, WarmStart)>,
}

impl FrenetCorridorPlanner {
    pub fn new(config: PlannerConfig) -> Self {
        let governor = DecisionGovernor::new(config.governor.clone());
        Self {
            config,
            governor,
            warm: None,
        }
    }

    pub fn reset(&mut self) {
        self.governor = DecisionGovernor::new(self.config.governor.clone());
        self.warm = None;
    }

    /// Obstacle processing, deviation decisions and corridor generation.
    pub fn prepare(&mut self, input: &CycleInput<'_>) -> Result<Prepared, PipelineError> {
        let w = &self.config.weights;
        w.validate()?;
        let (n, step, s0) = (w.horizon, w.step, input.ego.s);
        let footprint = input.ego.footprint();
        let road_lb = input.road_lb + footprint.half_width;
        let road_ub = input.road_ub - footprint.half_width;
        if road_lb >= road_ub {
            return Err(PipelineError::NarrowRoad {
                lower: road_lb,
                upper: road_ub,
            });
        }

        let s_end = s0 + (n - 1) as f64 * step;
        let processed = process_obstacles(
            input.obstacles,
            input.reference,
            &self.config.processor,
            footprint,
            s0,
            n,
            step,
        );
        let relevant = processed
            .all
            .into_iter()
            .filter(|p| {
                let (lo, hi) = p.s_range();
                p.is_dynamic || (hi >= s0 && lo <= s_end + step)
            })
            .collect();
        let obstacles = ObstacleSet::new(relevant);

        // Obstacles are already inflated by the ego half extents, so the
        // corridor applies to the ego centroid with zero width.
        let partition = self.governor.partition(&obstacles, road_lb, road_ub, 0.0)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| &obstacles.all[i]).collect::<Vec<_>>();
        let corridor = generate_bounds(
            pick(&partition.lower),
            pick(&partition.upper),
            road_lb,
            road_ub,
            n,
            step,
            s0,
        );

        let mut predictions: Vec<Prediction> = obstacles
            .dynamics()
            .filter_map(|p| p.predicted_d.clone())
            .collect();
        for &i in &partition.risk {
            let poly = &obstacles.all[i];
            let (lo, hi) = poly.s_range();
            let centre = poly.centroid().d;
            predictions.push(
                (0..n)
                    .map(|k| {
                        let s = s0 + k as f64 * step;
                        (s >= lo && s <= hi).then_some(centre)
                    })
                    .collect(),
            );
        }

        let control_bounds = curvature_bounds(input.reference, s0, w)?;
        Ok(Prepared {
            obstacles,
            partition,
            corridor,
            predictions,
            control_bounds,
        })
    }

    /// Path optimization on a prepared corridor. A warm-started solve that
    /// ends infeasible is retried from a cold start.
    pub fn optimize(
        &mut self,
        prepared: &Prepared,
        ego: &EgoState,
    ) -> Result<PlannerSolution, PlanError> {
        let w = &self.config.weights;
        let problem = PathProblem::new(
            &prepared.corridor,
            &prepared.predictions,
            w,
            ego.space_state(),
        )
        .with_control_bounds(prepared.control_bounds.clone());
        let warm = self.warm.as_ref().and_then(|(s_prev, ws)| {
            let shift = ((ego.s - s_prev) / w.step).round();
            (shift >= 0.0).then(|| ws.shifted(shift as usize))
        });
        let mut solution = solve(&problem, warm.as_ref())?;
        if warm.is_some() && solution.status == SolveStatus::Infeasible {
            let cold = solve(&problem, None)?;
            if cold.max_violation < solution.max_violation {
                solution = cold;
            }
        }
        if solution.status != SolveStatus::Infeasible {
            self.warm = Some((ego.s, solution.warm_start.clone()));
        } else {
            self.warm = None;
        }
        Ok(solution)
    }

    /// Runs a full planning cycle.
    pub fn plan(&mut self, input: &CycleInput<'_>) -> Result<CycleOutput, PipelineError> {
        let started = Instant::now();
        let prepared = self.prepare(input)?;
        let solution = self.optimize(&prepared, &input.ego)?;
        let output = CycleOutput {
            prepared,
            solution,
            runtime: started.elapsed().as_secs_f64(),
        };
        if output.solution.status == SolveStatus::Infeasible {
            return Err(PipelineError::Infeasible(Box::new(output)));
        }
        Ok(output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::obstacles::ObstacleKind;

    fn straight() -> ReferencePath {
        ReferencePath::build(&[Point2::new(0.0, 0.0), Point2::new(300.0, 0.0)], 1.0).unwrap()
    }

    fn ego() -> EgoState {
        EgoState {
            s: 5.0,
            d: 0.0,
            heading: 0.0,
            length: 4.5,
            width: 2.0,
        }
    }

    fn parked(id: usize, x: f64, y: f64) -> RawObstacle {
        RawObstacle {
            id,
            kind: ObstacleKind::Vehicle,
            position: Point2::new(x, y),
            yaw: 0.0,
            length: 4.5,
            width: 2.0,
            velocity: Point2::default(),
        }
    }

    #[test]
    fn empty_road_plans_reference() {
        let reference = straight();
        let mut planner = FrenetCorridorPlanner::new(PlannerConfig::default());
        let input = CycleInput {
            reference: &reference,
            road_lb: -3.5,
            road_ub: 3.5,
            ego: ego(),
            obstacles: &[],
        };
        let out = planner.plan(&input).unwrap();
        assert!(out.solution.path.iter().all(|s| s.d.abs() < 1e-6));
        assert_eq!(out.prepared.corridor.d_lb[0], -2.5);
        assert_eq!(out.prepared.corridor.d_ub[0], 2.5);
    }

    #[test]
    fn parked_car_pushes_path_left() {
        let reference = straight();
        let mut planner = FrenetCorridorPlanner::new(PlannerConfig::default());
        let obstacles = [parked(1, 30.0, -1.5)];
        let input = CycleInput {
            reference: &reference,
            road_lb: -3.0,
            road_ub: 5.0,
            ego: ego(),
            obstacles: &obstacles,
        };
        let out = planner.plan(&input).unwrap();
        assert_eq!(out.prepared.partition.lower, vec![0]);
        // Obstacle top edge -0.5, plus 0.3 margin and 1.0 half width.
        let k = 25;
        assert!((out.prepared.corridor.d_lb[k] - 0.8).abs() < 1e-9);
        assert!(out.solution.path[k].d >= 0.8 - 1e-6);

        // Second cycle reuses the shifted warm start.
        let next = CycleInput {
            ego: EgoState { s: 6.0, ..ego() },
            ..input
        };
        let again = planner.plan(&next).unwrap();
        assert!(again.solution.iterations <= out.solution.iterations);
    }

    #[test]
    fn blocked_road_is_reported() {
        let reference = straight();
        let mut planner = FrenetCorridorPlanner::new(PlannerConfig::default());
        let obstacles = [parked(1, 30.0, -1.0), parked(2, 30.0, 1.5)];
        let input = CycleInput {
            reference: &reference,
            road_lb: -2.5,
            road_ub: 2.5,
            ego: ego(),
            obstacles: &obstacles,
        };
        assert!(matches!(
            planner.plan(&input),
            Err(PipelineError::Blocked(_))
        ));
    }

    #[test]
    fn risk_obstacles_become_static_predictions() {
        let reference = straight();
        let mut config = PlannerConfig::default();
        config.set("risk_mode", 1.0).unwrap();
        let mut planner = FrenetCorridorPlanner::new(config);
        let obstacles = [parked(1, 30.0, 0.0)];
        let input = CycleInput {
            reference: &reference,
            road_lb: -6.0,
            road_ub: 6.0,
            ego: ego(),
            obstacles: &obstacles,
        };
        let prepared = planner.prepare(&input).unwrap();
        assert_eq!(prepared.partition.risk, vec![0]);
        assert_eq!(prepared.predictions.len(), 1);
        assert_eq!(prepared.predictions[0][25], Some(0.0));
        assert_eq!(prepared.predictions[0][0], None);
    }

    #[test]
    fn flat_keys() {
        let mut config = PlannerConfig::default();
        config.set("clearance", 0.4).unwrap();
        config.set("q_u", 3.0).unwrap();
        assert_eq!(config.governor.clearance, 0.4);
        assert_eq!(config.weights.q_u, 3.0);
        assert!(config.set("nope", 1.0).is_err());
    }
}
