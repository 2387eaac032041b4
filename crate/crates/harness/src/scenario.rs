//! Scenario description, loading and Monte Carlo perturbation.

use std::collections::BTreeMap;
use std::path::Path;

use fcp_core::frenet::{FrenetPoint, ReferencePath};
use fcp_core::geometry::Point2;
use fcp_core::obstacles::{ObstacleKind, RawObstacle};
use fcp_core::pipeline::{EgoState, PlannerConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::astar::AStarConfig;
use crate::episode::YieldRule;
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadLimits {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub s: f64,
    #[serde(default)]
    pub d: f64,
    /// Relative to the reference tangent (rad).
    #[serde(default)]
    pub heading: f64,
    /// Scripted cruise speed (m/s).
    pub speed: f64,
    #[serde(default = "default_ego_length")]
    pub length: f64,
    #[serde(default = "default_ego_width")]
    pub width: f64,
}

fn default_ego_length() -> f64 {
    4.5
}

fn default_ego_width() -> f64 {
    1.9
}

/// Obstacle at time zero; moves with constant velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub id: usize,
    pub kind: ObstacleKind,
    /// `[x, y, yaw]`.
    pub pose: [f64; 3],
    /// `[length, width]`.
    pub size: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
}

impl ObstacleSpec {
    pub fn is_moving(&self) -> bool {
        self.velocity[0] != 0.0 || self.velocity[1] != 0.0
    }

    /// True pose at time `t`.
    pub fn at(&self, t: f64) -> RawObstacle {
        let velocity = Point2::new(self.velocity[0], self.velocity[1]);
        RawObstacle {
            id: self.id,
            kind: self.kind,
            position: Point2::new(self.pose[0], self.pose[1]) + velocity * t,
            yaw: self.pose[2],
            length: self.size[0],
            width: self.size[1],
            velocity,
        }
    }
}

/// Per-cycle Gaussian perception noise on obstacle poses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub position_std: f64,
    pub heading_std: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            position_std: 0.1,
            heading_std: 0.02,
        }
    }
}

/// Uniform pose perturbation ranges for Monte Carlo trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Randomization {
    /// Half-range along the reference (m).
    pub longitudinal: f64,
    /// Half-range across the reference (m).
    pub lateral: f64,
    /// Half-range of yaw (deg).
    pub heading_deg: f64,
    /// Perturb moving obstacles as well as parked ones.
    pub include_moving: bool,
}

impl Default for Randomization {
    fn default() -> Self {
        Self {
            longitudinal: 10.0,
            lateral: 2.0,
            heading_deg: 10.0,
            include_moving: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// Reference waypoints `[x, y]`.
    pub reference: Vec<[f64; 2]>,
    pub road: RoadLimits,
    pub ego: EgoSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Flat planner parameter overrides.
    #[serde(default)]
    pub planner: BTreeMap<String, f64>,
    #[serde(default = "default_cycle_period")]
    pub cycle_period: f64,
    /// Episode ends once the ego station reaches this value (m).
    pub goal_s: f64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
    #[serde(default)]
    pub randomization: Randomization,
    #[serde(default)]
    pub yield_rule: YieldRule,
    #[serde(default)]
    pub astar: AStarConfig,
}

fn default_cycle_period() -> f64 {
    0.1
}

fn default_max_cycles() -> usize {
    1000
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| HarnessError::InvalidScenario(format!("{}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn planner_config(&self) -> Result<PlannerConfig, HarnessError> {
        let mut config = PlannerConfig::default();
        for (key, &value) in &self.planner {
            config
                .set(key, value)
                .map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
        }
        Ok(config)
    }

    pub fn reference_path(&self) -> Result<ReferencePath, HarnessError> {
        let step = self.planner_config()?.weights.step;
        let pts: Vec<Point2> = self.reference.iter().map(|&p| Point2::from(p)).collect();
        Ok(ReferencePath::build(&pts, step)?)
    }

    pub fn ego_state(&self) -> EgoState {
        EgoState {
            s: self.ego.s,
            d: self.ego.d,
            heading: self.ego.heading,
            length: self.ego.length,
            width: self.ego.width,
        }
    }

    /// Applies a flat override: harness knobs (`cycle_period`, `goal_s`,
    /// `max_cycles`, `position_std`, `heading_std`, `ego_speed`) or any
    /// planner parameter.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), HarnessError> {
        match key {
            "cycle_period" => self.cycle_period = value,
            "goal_s" => self.goal_s = value,
            "max_cycles" => self.max_cycles = value.max(0.0).round() as usize,
            "position_std" => self.noise.position_std = value,
            "heading_std" => self.noise.heading_std = value,
            "ego_speed" => self.ego.speed = value,
            _ => {
                PlannerConfig::default()
                    .set(key, value)
                    .map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
                self.planner.insert(key.to_string(), value);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidScenario(msg));
        if !(self.cycle_period > 0.0) {
            return bad(format!(
                "cycle_period must be > 0, got {}",
                self.cycle_period
            ));
        }
        if !(self.road.lower < self.road.upper) {
            return bad("road.lower must be below road.upper".into());
        }
        let half = 0.5 * self.ego.width;
        if self.ego.d - half < self.road.lower || self.ego.d + half > self.road.upper {
            return bad(format!(
                "ego at d = {} does not fit inside the road",
                self.ego.d
            ));
        }
        if !(self.ego.speed >= 0.0) || !(self.ego.length > 0.0) || !(self.ego.width > 0.0) {
            return bad("ego speed must be >= 0 and dimensions > 0".into());
        }
        if self.noise.position_std < 0.0 || self.noise.heading_std < 0.0 {
            return bad("noise standard deviations must be >= 0".into());
        }
        for o in &self.obstacles {
            if !(o.size[0] > 0.0 && o.size[1] > 0.0) {
                return bad(format!("obstacle {} has non-positive size", o.id));
            }
        }
        let config = self.planner_config()?;
        config
            .weights
            .validate()
            .map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
        let reference = self.reference_path()?;
        let needed = self.goal_s + (config.weights.horizon - 1) as f64 * config.weights.step;
        if needed > reference.length() {
            return bad(format!(
                "reference ({:.1} m) must extend one horizon past goal_s (needs {needed:.1} m)",
                reference.length()
            ));
        }
        if self.ego.s < 0.0 || self.ego.s >= self.goal_s {
            return bad("ego.s must lie in [0, goal_s)".into());
        }
        Ok(())
    }

    /// Copy with obstacle poses perturbed uniformly within the
    /// randomization ranges, in the Frenet frame of the reference.
    pub fn randomized<R: Rng>(&self, rng: &mut R) -> Result<Scenario, HarnessError> {
        let reference = self.reference_path()?;
        let r = self.randomization;
        let mut out = self.clone();
        for o in out.obstacles.iter_mut() {
            if o.is_moving() && !r.include_moving {
                continue;
            }
            let ds = rng.gen_range(-1.0..=1.0) * r.longitudinal;
            let dd = rng.gen_range(-1.0..=1.0) * r.lateral;
            let dyaw = (rng.gen_range(-1.0..=1.0) * r.heading_deg).to_radians();
            let fp = reference.cart_to_frenet(Point2::new(o.pose[0], o.pose[1]))?;
            let s = (fp.s + ds).clamp(0.0, reference.length());
            let p = reference.frenet_to_cart(FrenetPoint::new(s, fp.d + dd))?;
            o.pose = [p.x, p.y, o.pose[2] + dyaw];
        }
        Ok(out)
    }
}
