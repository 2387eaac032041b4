//! Path optimizer: nonlinear program over the space-domain bicycle model.
//!
//! Decision variables are the steering proxies `u_0..u_{N-2}` and slacks
//! `alpha_1..alpha_{N-1}`; states are recovered by single shooting from the
//! measured initial state. Corridor bounds on `d_1..d_{N-1}` are handled with
//! an augmented Lagrangian around a projected L-BFGS inner solver.

mod cost;
mod kinematics;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::Corridor;
use crate::frenet::{FrenetError, ReferencePath};

pub use cost::{evaluate_cost, rollout};
pub use kinematics::{
    axle_ratio, beta_approx, beta_exact, check_guard, curvature_bounds_from_delta, propagate,
    reference_steering, KinematicsError, SpaceState,
};
pub use solver::solve;

/// Predicted lateral offset of one moving obstacle per station; `None` where
/// the obstacle does not cross the station within the prediction horizon.
pub type Prediction = Vec<Option<f64>>;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error("initial offset {d:.3} m outside relaxed bounds [{lower:.3}, {upper:.3}]")]
    InitialStateOutside { d: f64, lower: f64, upper: f64 },
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown planner parameter `{0}`")]
pub struct UnknownParameter(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerWeights {
    /// Deviation weight per station.
    pub q_d: f64,
    /// Steering weight per step.
    pub q_u: f64,
    pub lambda_curve: f64,
    /// Centering weight on obstacle-tightened stations.
    pub lambda_risk: f64,
    pub lambda_dyn: f64,
    pub lambda_alpha: f64,
    /// Slack cap (m).
    pub alpha_max: f64,
    /// Station spacing (m).
    pub step: f64,
    /// Number of stations, including the initial one.
    pub horizon: usize,
    pub l_f: f64,
    pub l_r: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub eps_guard: f64,
    /// Regularizer of the dynamic-risk denominator (m^2).
    pub eps_dyn: f64,
    /// Projected-gradient tolerance of each subproblem.
    pub tolerance: f64,
    /// Iteration cap per subproblem.
    pub max_iterations: usize,
}

impl Default for PlannerWeights {
    fn default() -> Self {
        Self {
            q_d: 1.0,
            q_u: 10.0,
            lambda_curve: 1.0,
            lambda_risk: 0.2,
            lambda_dyn: 5.0,
            lambda_alpha: 1e4,
            alpha_max: 0.3,
            step: 1.0,
            horizon: 60,
            l_f: 1.5,
            l_r: 1.5,
            delta_min: -0.6,
            delta_max: 0.6,
            eps_guard: 0.2,
            eps_dyn: 0.04,
            tolerance: 1e-4,
            max_iterations: 100,
        }
    }
}

impl PlannerWeights {
    pub const KEYS: [&'static str; 17] = [
        "q_d",
        "q_u",
        "lambda_curve",
        "lambda_risk",
        "lambda_dyn",
        "lambda_alpha",
        "alpha_max",
        "step",
        "horizon",
        "l_f",
        "l_r",
        "delta_min",
        "delta_max",
        "eps_guard",
        "eps_dyn",
        "tolerance",
        "max_iterations",
    ];

    /// Sets one parameter by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), UnknownParameter> {
        let slot = match key {
            "q_d" => &mut self.q_d,
            "q_u" => &mut self.q_u,
            "lambda_curve" => &mut self.lambda_curve,
            "lambda_risk" => &mut self.lambda_risk,
            "lambda_dyn" => &mut self.lambda_dyn,
            "lambda_alpha" => &mut self.lambda_alpha,
            "alpha_max" => &mut self.alpha_max,
            "step" => &mut self.step,
            "l_f" => &mut self.l_f,
            "l_r" => &mut self.l_r,
            "delta_min" => &mut self.delta_min,
            "delta_max" => &mut self.delta_max,
            "eps_guard" => &mut self.eps_guard,
            "eps_dyn" => &mut self.eps_dyn,
            "tolerance" => &mut self.tolerance,
            "horizon" => {
                self.horizon = value.max(0.0).round() as usize;
                return Ok(());
            }
            "max_iterations" => {
                self.max_iterations = value.max(0.0).round() as usize;
                return Ok(());
            }
            _ => return Err(UnknownParameter(key.to_string())),
        };
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let weights = [
            ("q_d", self.q_d),
            ("q_u", self.q_u),
            ("lambda_curve", self.lambda_curve),
            ("lambda_risk", self.lambda_risk),
            ("lambda_dyn", self.lambda_dyn),
            ("lambda_alpha", self.lambda_alpha),
            ("alpha_max", self.alpha_max),
            ("eps_dyn", self.eps_dyn),
        ];
        for (name, v) in weights {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(PlanError::InvalidConfig(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        let positive = [
            ("step", self.step),
            ("l_f + l_r", self.l_f + self.l_r),
            ("l_r", self.l_r),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PlanError::InvalidConfig(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.l_f < 0.0 {
            return Err(PlanError::InvalidConfig("l_f must be >= 0".into()));
        }
        if self.horizon < 2 {
            return Err(PlanError::InvalidConfig(
                "horizon needs at least 2 stations".into(),
            ));
        }
        if !(self.delta_min < self.delta_max) {
            return Err(PlanError::InvalidConfig(
                "delta_min must be below delta_max".into(),
            ));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.eps_guard) {
            return Err(PlanError::InvalidConfig(
                "eps_guard must lie in [0, pi/2)".into(),
            ));
        }
        beta_approx(self.delta_min, self.l_f, self.l_r)?;
        beta_approx(self.delta_max, self.l_f, self.l_r)?;
        Ok(())
    }

    /// Nominal steering-proxy box for a straight reference.
    pub fn nominal_control_box(&self) -> (f64, f64) {
        let a = axle_ratio(self.l_f, self.l_r);
        (a * self.delta_min, a * self.delta_max)
    }
}

/// Curvature-shifted control boxes for the `n - 1` steps starting at `s0`.
pub fn curvature_bounds(
    reference: &ReferencePath,
    s0: f64,
    weights: &PlannerWeights,
) -> Result<Vec<(f64, f64)>, PlanError> {
    let deltas = reference.heading_deltas(s0, weights.horizon - 1)?;
    deltas
        .iter()
        .enumerate()
        .map(|(k, &dh)| {
            curvature_bounds_from_delta(
                k,
                dh,
                weights.step,
                weights.l_f,
                weights.l_r,
                weights.delta_min,
                weights.delta_max,
            )
            .map_err(PlanError::from)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl ControlSequence {
    pub fn zeros(len: usize) -> Self {
        Self {
            u: vec![0.0; len],
            alpha: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.alpha);
        x
    }

    pub fn from_vector(x: &[f64]) -> Self {
        let (u, alpha) = x.split_at(x.len() / 2);
        Self {
            u: u.to_vec(),
            alpha: alpha.to_vec(),
        }
    }
}

/// Everything one solve needs.
#[derive(Clone, Debug)]
pub struct PathProblem<'a> {
    pub corridor: &'a Corridor,
    pub dynamics: &'a [Prediction],
    pub weights: &'a PlannerWeights,
    pub init: SpaceState,
    /// Box for each `u_k`, length `N - 1`.
    pub control_bounds: Vec<(f64, f64)>,
}

impl<'a> PathProblem<'a> {
    /// Problem over a straight reference (nominal control boxes).
    pub fn new(
        corridor: &'a Corridor,
        dynamics: &'a [Prediction],
        weights: &'a PlannerWeights,
        init: SpaceState,
    ) -> Self {
        let n = corridor.len().saturating_sub(1);
        Self {
            corridor,
            dynamics,
            weights,
            init,
            control_bounds: vec![weights.nominal_control_box(); n],
        }
    }

    pub fn with_control_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.control_bounds = bounds;
        self
    }

    pub fn stations(&self) -> usize {
        self.corridor.len()
    }

    pub fn controls_len(&self) -> usize {
        self.corridor.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Solver state carried between planning cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    /// Raw iterate `[u; alpha]` before slack reconciliation.
    pub x: Vec<f64>,
    pub mu_lower: Vec<f64>,
    pub mu_upper: Vec<f64>,
    pub rho: f64,
    pub slack_active: bool,
}

impl WarmStart {
    /// Advances the warm start by `steps` stations, repeating the final
    /// control and zero-filling slacks and multipliers. The penalty and slack
    /// phase restart from their initial values.
    pub fn shifted(&self, steps: usize) -> Self {
        let m = self.x.len() / 2;
        let (u, alpha) = self.x.split_at(m);
        let shift = |v: &[f64], fill: f64| -> Vec<f64> {
            let k = steps.min(v.len());
            let mut out: Vec<f64> = v[k..].to_vec();
            out.resize(v.len(), fill);
            out
        };
        let last_u = u.last().copied().unwrap_or(0.0);
        let mut x = shift(u, last_u);
        x.extend(shift(alpha, 0.0));
        Self {
            x,
            mu_lower: shift(&self.mu_lower, 0.0),
            mu_upper: shift(&self.mu_upper, 0.0),
            rho: solver::INITIAL_PENALTY,
            slack_active: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionRow {
    pub k: usize,
    pub s: f64,
    pub d: f64,
    pub phi: f64,
    pub u: Option<f64>,
    pub alpha: f64,
    pub d_lb: f64,
    pub d_ub: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlannerSolution {
    /// States at all `N` stations; `path[0]` is the initial state.
    pub path: Vec<SpaceState>,
    pub controls: ControlSequence,
    pub cost: f64,
    pub iterations: usize,
    /// Largest violation of the unrelaxed corridor bounds (m).
    pub max_violation: f64,
    pub solve_time: f64,
    pub status: SolveStatus,
    #[serde(skip)]
    pub warm_start: WarmStart,
}

impl PlannerSolution {
    pub fn rows(&self, corridor: &Corridor) -> Vec<SolutionRow> {
        self.path
            .iter()
            .enumerate()
            .map(|(k, st)| SolutionRow {
                k,
                s: st.s,
                d: st.d,
                phi: st.phi,
                u: self.controls.u.get(k).copied(),
                alpha: if k == 0 {
                    0.0
                } else {
                    self.controls.alpha[k - 1]
                },
                d_lb: corridor.d_lb[k],
                d_ub: corridor.d_ub[k],
            })
            .collect()
    }

    pub fn slack_sum(&self) -> f64 {
        self.controls.alpha.iter().sum()
    }
}
