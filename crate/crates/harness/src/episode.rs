//! Closed-loop episode: perception noise, planning, geometric path following.

use std::time::Instant;

use fcp_core::frenet::{FrenetPoint, ReferencePath};
use fcp_core::obstacles::RawObstacle;
use fcp_core::optimizer::{SolveStatus, SpaceState};
use fcp_core::pipeline::{CycleInput, CycleOutput, EgoState, FrenetCorridorPlanner, PipelineError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::astar::astar_baseline;
use crate::polygon::Polygon;
use crate::scenario::Scenario;
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Fcp,
    Astar,
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fcp" => Ok(Self::Fcp),
            "astar" => Ok(Self::Astar),
            other => Err(format!("unknown planner `{other}` (expected fcp or astar)")),
        }
    }
}

/// Go/stop rule standing in for a speed planner: the ego holds position
/// when following the current path at cruise speed would bring it within
/// `buffer` of a moving obstacle's constant-velocity forecast, unless
/// holding position would leave even less clearance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct YieldRule {
    /// Forecast horizon (s).
    pub lookahead: f64,
    /// Minimum predicted clearance (m).
    pub buffer: f64,
}

impl Default for YieldRule {
    fn default() -> Self {
        Self {
            lookahead: 10.0,
            buffer: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EgoPose {
    pub s: f64,
    pub d: f64,
    pub heading: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub time: f64,
    pub ego: EgoPose,
    /// Distance from the ego to the nearest true obstacle (m).
    pub nearest_distance: Option<f64>,
    /// Planning wall time (s).
    pub runtime: f64,
    /// Planned path in Cartesian coordinates.
    pub path: Vec<[f64; 2]>,
    /// Planned vehicle yaw per waypoint (rad, Cartesian).
    pub yaw: Vec<f64>,
    pub frenet_path: Vec<FrenetPoint>,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub max_violation: f64,
    pub slack_sum: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Aborted { cause: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct EpisodeLog {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub outcome: Outcome,
    pub collision: bool,
    pub road_exit: bool,
    pub records: Vec<CycleRecord>,
}

impl EpisodeLog {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Completed && !self.collision && !self.road_exit
    }
}

/// Path the ego follows: station, offset and relative heading per waypoint.
struct FollowPath {
    states: Vec<SpaceState>,
}

impl FollowPath {
    fn from_states(states: &[SpaceState]) -> Self {
        Self {
            states: states.to_vec(),
        }
    }

    /// Heading of each waypoint taken from the following segment.
    fn from_waypoints(points: &[FrenetPoint]) -> Self {
        let states = points
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let (a, b) = if k + 1 < points.len() {
                    (*p, points[k + 1])
                } else {
                    (points[k - 1], *p)
                };
                SpaceState::new(p.s, p.d, (b.d - a.d).atan2(b.s - a.s))
            })
            .collect();
        Self { states }
    }

    fn end(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.s)
    }

    /// Offset and heading at station `s`, clamped to the path.
    fn sample(&self, s: f64, piecewise_heading: bool) -> (f64, f64) {
        let st = &self.states;
        let s = s.clamp(st[0].s, self.end());
        let k = st.partition_point(|p| p.s <= s).clamp(1, st.len() - 1) - 1;
        let (a, b) = (st[k], st[k + 1]);
        let t = if b.s > a.s {
            (s - a.s) / (b.s - a.s)
        } else {
            0.0
        };
        let d = a.d + t * (b.d - a.d);
        let phi = if piecewise_heading {
            a.phi
        } else {
            a.phi + t * (b.phi - a.phi)
        };
        (d, phi)
    }
}

fn ego_polygon(
    reference: &ReferencePath,
    s: f64,
    d: f64,
    phi: f64,
    ego: &EgoState,
) -> Result<(Polygon, EgoPose), HarnessError> {
    let p = reference.frenet_to_cart(FrenetPoint::new(s, d))?;
    let yaw = reference.heading_at(s)? + phi;
    let pose = EgoPose {
        s,
        d,
        heading: phi,
        x: p.x,
        y: p.y,
        yaw,
    };
    Ok((Polygon::rectangle(p, yaw, ego.length, ego.width), pose))
}

fn obstacle_polygon(o: &RawObstacle) -> Polygon {
    Polygon::rectangle(o.position, o.yaw, o.length, o.width)
}

fn abort_cause(err: &PipelineError) -> String {
    match err {
        PipelineError::Infeasible(out) => format!(
            "infeasible: corridor violated by {:.3} m",
            out.solution.max_violation
        ),
        other => other.to_string(),
    }
}

struct Planned {
    path: FollowPath,
    status: Option<SolveStatus>,
    iterations: usize,
    max_violation: f64,
    slack_sum: f64,
}

/// One planning call; errors are returned as abort causes.
fn plan_cycle(
    planner: &mut FrenetCorridorPlanner,
    kind: PlannerKind,
    input: &CycleInput<'_>,
    sc: &Scenario,
) -> Result<Planned, String> {
    match kind {
        PlannerKind::Fcp => {
            let sol = planner.plan(input).map_err(|e| abort_cause(&e))?.solution;
            Ok(Planned {
                path: FollowPath::from_states(&sol.path),
                status: Some(sol.status),
                iterations: sol.iterations,
                max_violation: sol.max_violation,
                slack_sum: sol.slack_sum(),
            })
        }
        PlannerKind::Astar => {
            let prepared = planner.prepare(input).map_err(|e| abort_cause(&e))?;
            let found = astar_baseline(&prepared.corridor, input.ego.space_state(), &sc.astar)
                .map_err(|e| e.to_string())?;
            Ok(Planned {
                path: FollowPath::from_waypoints(&found.waypoints),
                status: None,
                iterations: found.expanded,
                max_violation: 0.0,
                slack_sum: 0.0,
            })
        }
    }
}

/// Seeded Gaussian noise on obstacle poses.
struct Perception {
    rng: ChaCha8Rng,
    position: Option<Normal<f64>>,
    heading: Option<Normal<f64>>,
}

impl Perception {
    fn new(sc: &Scenario, seed: u64) -> Result<Self, HarnessError> {
        let normal = |std: f64| -> Result<Option<Normal<f64>>, HarnessError> {
            if std > 0.0 {
                Normal::new(0.0, std)
                    .map(Some)
                    .map_err(|e| HarnessError::InvalidScenario(e.to_string()))
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            position: normal(sc.noise.position_std)?,
            heading: normal(sc.noise.heading_std)?,
        })
    }

    fn observe(&mut self, truth: &[RawObstacle]) -> Vec<RawObstacle> {
        truth
            .iter()
            .map(|o| {
                let mut o = o.clone();
                if let Some(n) = self.position {
                    o.position.x += n.sample(&mut self.rng);
                    o.position.y += n.sample(&mut self.rng);
                }
                if let Some(n) = self.heading {
                    o.yaw += n.sample(&mut self.rng);
                }
                o
            })
            .collect()
    }
}

/// Single planning cycle from the scenario's initial state with noisy
/// observations at time zero. The inner result carries planner failures.
pub fn plan_initial(
    sc: &Scenario,
    seed: u64,
) -> Result<Result<CycleOutput, PipelineError>, HarnessError> {
    sc.validate()?;
    let reference = sc.reference_path()?;
    let mut planner = FrenetCorridorPlanner::new(sc.planner_config()?);
    let truth: Vec<RawObstacle> = sc.obstacles.iter().map(|o| o.at(0.0)).collect();
    let observed = Perception::new(sc, seed)?.observe(&truth);
    let input = CycleInput {
        reference: &reference,
        road_lb: sc.road.lower,
        road_ub: sc.road.upper,
        ego: sc.ego_state(),
        obstacles: &observed,
    };
    Ok(planner.plan(&input))
}

/// Runs one closed-loop episode. The outcome records why an episode
/// stopped early; only configuration problems are errors.
pub fn run_episode(
    sc: &Scenario,
    planner_kind: PlannerKind,
    seed: u64,
) -> Result<EpisodeLog, HarnessError> {
    sc.validate()?;
    let reference = sc.reference_path()?;
    let config = sc.planner_config()?;
    let mut planner = FrenetCorridorPlanner::new(config);
    let mut perception = Perception::new(sc, seed)?;

    let mut ego = sc.ego_state();
    let dt = sc.cycle_period;
    let mut records = Vec::new();
    let mut collision = false;
    let mut road_exit = false;
    let mut outcome = Outcome::Aborted {
        cause: format!("goal not reached within {} cycles", sc.max_cycles),
    };

    for cycle in 0..sc.max_cycles {
        let time = cycle as f64 * dt;
        let truth: Vec<RawObstacle> = sc.obstacles.iter().map(|o| o.at(time)).collect();
        let (ego_poly, pose) = ego_polygon(&reference, ego.s, ego.d, ego.heading, &ego)?;

        let nearest = truth
            .iter()
            .map(|o| ego_poly.distance(&obstacle_polygon(o)))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        if let Some(hit) = truth
            .iter()
            .find(|o| ego_poly.intersects(&obstacle_polygon(o)))
        {
            collision = true;
            outcome = Outcome::Aborted {
                cause: format!("collision with obstacle {}", hit.id),
            };
            break;
        }
        let outside = ego_poly.vertices.iter().any(|&v| {
            reference
                .cart_to_frenet(v)
                .map(|fp| fp.d < sc.road.lower - 1e-6 || fp.d > sc.road.upper + 1e-6)
                .unwrap_or(false)
        });
        if outside {
            road_exit = true;
            outcome = Outcome::Aborted {
                cause: "left the road".into(),
            };
            break;
        }
        if ego.s >= sc.goal_s {
            outcome = Outcome::Completed;
            break;
        }

        let observed = perception.observe(&truth);

        let input = CycleInput {
            reference: &reference,
            road_lb: sc.road.lower,
            road_ub: sc.road.upper,
            ego,
            obstacles: &observed,
        };
        let started = Instant::now();
        let planned = plan_cycle(&mut planner, planner_kind, &input, sc);
        let runtime = started.elapsed().as_secs_f64();
        let Planned {
            path,
            status,
            iterations,
            max_violation,
            slack_sum,
        } = match planned {
            Ok(p) => p,
            Err(cause) => {
                outcome = Outcome::Aborted { cause };
                break;
            }
        };
        log::debug!(
            "cycle {cycle}: s = {:.2}, d = {:.3}, status = {status:?}, iterations = {iterations}",
            ego.s,
            ego.d
        );
        let piecewise = planner_kind == PlannerKind::Astar;

        let speed = if must_yield(&reference, &path, piecewise, &ego, sc, &observed)? {
            0.0
        } else {
            sc.ego.speed
        };

        let cart_path = path
            .states
            .iter()
            .map(|st| {
                reference
                    .frenet_to_cart(FrenetPoint::new(st.s, st.d))
                    .map(|p| [p.x, p.y])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let yaw = path
            .states
            .iter()
            .map(|st| reference.heading_at(st.s).map(|h| h + st.phi))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(CycleRecord {
            cycle,
            time,
            ego: pose,
            nearest_distance: nearest,
            runtime,
            path: cart_path,
            yaw,
            frenet_path: path
                .states
                .iter()
                .map(|s| FrenetPoint::new(s.s, s.d))
                .collect(),
            status,
            iterations,
            max_violation,
            slack_sum,
            speed,
        });

        let s_next = (ego.s + speed * dt).min(path.end());
        let (d, phi) = path.sample(s_next, piecewise);
        ego.s = s_next;
        ego.d = d;
        ego.heading = phi;
    }

    log::info!(
        "episode '{}' ({planner_kind:?}, seed {seed}): {outcome:?}",
        sc.name
    );
    Ok(EpisodeLog {
        scenario: sc.name.clone(),
        planner: planner_kind,
        seed,
        outcome,
        collision,
        road_exit,
        records,
    })
}

fn must_yield(
    reference: &ReferencePath,
    path: &FollowPath,
    piecewise: bool,
    ego: &EgoState,
    sc: &Scenario,
    observed: &[RawObstacle],
) -> Result<bool, HarnessError> {
    let movers: Vec<&RawObstacle> = observed.iter().filter(|o| o.speed() > 0.0).collect();
    if movers.is_empty() || sc.ego.speed == 0.0 {
        return Ok(false);
    }
    let rule = sc.yield_rule;
    let samples = (rule.lookahead / sc.cycle_period).ceil() as usize;
    let (here, _) = ego_polygon(reference, ego.s, ego.d, ego.heading, ego)?;
    let (mut go, mut stop) = (f64::INFINITY, f64::INFINITY);
    for i in 1..=samples {
        let tau = i as f64 * sc.cycle_period;
        let s = (ego.s + sc.ego.speed * tau).min(path.end());
        let (d, phi) = path.sample(s, piecewise);
        let (ahead, _) = ego_polygon(reference, s, d, phi, ego)?;
        for o in &movers {
            let mut future = (*o).clone();
            future.position = o.position + o.velocity * tau;
            let poly = obstacle_polygon(&future);
            go = go.min(ahead.distance(&poly));
            stop = stop.min(here.distance(&poly));
        }
    }
    // Holding position inside a mover's sweep is no better than going.
    Ok(go < rule.buffer && stop > go)
}
