//! Augmented Lagrangian outer loop with a projected Gauss-Newton inner solver.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::cost::{curvature, objective, rollout, Curvature, Penalty};
use super::{
    check_guard, ControlSequence, PathProblem, PlanError, PlannerSolution, SolveStatus, WarmStart,
};

pub(crate) const INITIAL_PENALTY: f64 = 100.0;
const MAX_PENALTY: f64 = 1e8;
/// Penalty at which a hard-bound solve that still violates the corridor
/// switches the slacks on.
const SLACK_TRIGGER_PENALTY: f64 = 1e5;
const MAX_OUTER: usize = 30;
const CONSTRAINT_TOL: f64 = 1e-6;

struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let moved = (x[i] - g[i]).clamp(self.lower[i], self.upper[i]);
            worst = worst.max((x[i] - moved).abs());
        }
        worst
    }

    /// Variables held at a bound by a gradient pointing outward.
    fn is_free(&self, x: &[f64], g: &[f64], i: usize, margin: f64) -> bool {
        let at_lower = x[i] <= self.lower[i] + margin && g[i] > 0.0;
        let at_upper = x[i] >= self.upper[i] - margin && g[i] < 0.0;
        !(at_lower || at_upper)
    }
}

struct InnerResult {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Newton step on the free variables under the Gauss-Newton model, with
/// free slacks eliminated by Schur complement.
fn newton_direction(curv: &Curvature, g: &[f64], free: &[bool]) -> Option<Vec<f64>> {
    let m = curv.m;
    let (g_u, g_a) = g.split_at(m);
    let jac = |r: usize, j: usize| curv.jacobian[r * m + j];

    let mut weight = curv.station.clone();
    let mut v = vec![0.0; m];
    for r in 0..m {
        if free[m + r] {
            weight[r] -= curv.coupling[r] * curv.coupling[r] / curv.slack[r];
            v[r] = curv.coupling[r] * g_a[r] / curv.slack[r];
        }
    }

    let idx: Vec<usize> = (0..m).filter(|&j| free[j]).collect();
    let mut p = vec![0.0; 2 * m];
    if !idx.is_empty() {
        let mut full = vec![0.0; m * m];
        for r in 0..m {
            let wr = weight[r];
            if wr == 0.0 {
                continue;
            }
            for a in 0..=r {
                let t = wr * jac(r, a);
                if t == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    full[a * m + b] += t * jac(r, b);
                }
            }
        }
        let f = idx.len();
        let mut h = DMatrix::<f64>::zeros(f, f);
        let mut rhs = DVector::<f64>::zeros(f);
        for (ia, &a) in idx.iter().enumerate() {
            for (ib, &b) in idx.iter().enumerate().take(ia + 1) {
                let val = full[a * m + b];
                h[(ia, ib)] = val;
                h[(ib, ia)] = val;
            }
            h[(ia, ia)] += curv.control[a];
            let jt_v: f64 = (a..m).map(|r| jac(r, a) * v[r]).sum();
            rhs[ia] = -g_u[a] + jt_v;
        }
        let scale = (0..f).fold(0.0f64, |s, i| s.max(h[(i, i)])).max(1e-12);
        let mut damping = 1e-12 * scale;
        let solution = loop {
            let mut damped = h.clone();
            for i in 0..f {
                damped[(i, i)] += damping;
            }
            if let Some(chol) = damped.cholesky() {
                break chol.solve(&rhs);
            }
            damping *= 100.0;
            if damping > scale {
                return None;
            }
        };
        for (ia, &a) in idx.iter().enumerate() {
            p[a] = solution[ia];
        }
    }
    for r in 0..m {
        if free[m + r] {
            let jp: f64 = (0..=r).map(|j| jac(r, j) * p[j]).sum();
            p[m + r] = -(g_a[r] + curv.coupling[r] * jp) / curv.slack[r];
        }
    }
    Some(p)
}

/// Projected Newton iteration on the penalized subproblem. Evaluation
/// failures (singularity guard) are treated as rejected trial points.
fn minimize_box(
    problem: &PathProblem<'_>,
    penalty: &Penalty<'_>,
    x0: Vec<f64>,
    bounds: &BoxBounds,
    tolerance: f64,
    max_iterations: usize,
) -> Option<InnerResult> {
    let mut f = |v: &[f64]| objective(v, problem, Some(penalty)).ok();
    let mut x = x0;
    bounds.project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let n = x.len();
    let mut iterations = 0;
    let mut converged = false;
    let mut free = vec![true; n];

    while iterations < max_iterations {
        let pg = bounds.projected_gradient_norm(&x, &g);
        if pg < tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let margin = pg.min(1e-3);
        for (i, slot) in free.iter_mut().enumerate() {
            *slot = bounds.is_free(&x, &g, i, margin);
        }

        let newton = curvature(&x, problem, penalty)
            .ok()
            .and_then(|curv| newton_direction(&curv, &g, &free))
            .filter(|p| p.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() < 0.0);
        let mut accepted = newton.and_then(|p| line_search(&mut f, &x, fx, &g, &p, bounds));
        if accepted.is_none() {
            let scale = g.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            let gamma = if scale > 0.0 {
                (0.1 / scale).min(1.0)
            } else {
                1.0
            };
            let p: Vec<f64> = g.iter().map(|v| -gamma * v).collect();
            accepted = line_search(&mut f, &x, fx, &g, &p, bounds);
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    if !converged && bounds.projected_gradient_norm(&x, &g) < tolerance {
        converged = true;
    }
    Some(InnerResult {
        x,
        iterations,
        converged,
    })
}

/// Armijo backtracking along the projection arc.
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    g: &[f64],
    direction: &[f64],
    bounds: &BoxBounds,
) -> Option<(Vec<f64>, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut t = 1.0;
    for _ in 0..50 {
        let mut trial: Vec<f64> = x.iter().zip(direction).map(|(a, p)| a + t * p).collect();
        bounds.project(&mut trial);
        let decrease: f64 = g
            .iter()
            .zip(trial.iter().zip(x))
            .map(|(gi, (a, b))| gi * (a - b))
            .sum();
        if decrease < 0.0 {
            if let Some((ft, gt)) = f(&trial) {
                if ft <= fx + 1e-4 * decrease {
                    return Some((trial, ft, gt));
                }
            }
        }
        t *= 0.5;
    }
    None
}

/// Violation of the relaxed constraints at stations `1..N`.
fn relaxed_violation(d: &[f64], alpha: &[f64], problem: &PathProblem<'_>) -> f64 {
    let c = problem.corridor;
    (1..d.len())
        .map(|k| {
            let a = alpha[k - 1];
            (c.d_lb[k] - a - d[k]).max(d[k] - c.d_ub[k] - a).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Solves the path program, optionally warm-started from a previous cycle.
pub fn solve(
    problem: &PathProblem<'_>,
    warm: Option<&WarmStart>,
) -> Result<PlannerSolution, PlanError> {
    let started = Instant::now();
    let w = problem.weights;
    w.validate()?;
    let n = problem.stations();
    if n < 2 || problem.control_bounds.len() != n - 1 {
        return Err(PlanError::InvalidConfig(format!(
            "corridor has {n} stations but {} control boxes",
            problem.control_bounds.len()
        )));
    }
    let m = n - 1;
    let c = problem.corridor;
    let (lower, upper) = (c.d_lb[0] - w.alpha_max, c.d_ub[0] + w.alpha_max);
    if !(problem.init.d >= lower && problem.init.d <= upper) {
        return Err(PlanError::InitialStateOutside {
            d: problem.init.d,
            lower,
            upper,
        });
    }
    check_guard(problem.init.phi, 0.0, w.eps_guard)?;

    let usable =
        warm.filter(|ws| ws.x.len() == 2 * m && ws.mu_lower.len() == m && ws.mu_upper.len() == m);
    let mut slack_active = usable.is_some_and(|ws| ws.slack_active);
    let mut rho = usable.map_or(INITIAL_PENALTY, |ws| ws.rho);
    let mut mu_lower = usable.map_or_else(|| vec![0.0; m], |ws| ws.mu_lower.clone());
    let mut mu_upper = usable.map_or_else(|| vec![0.0; m], |ws| ws.mu_upper.clone());

    let mut bounds = BoxBounds {
        lower: problem
            .control_bounds
            .iter()
            .map(|b| b.0)
            .chain(std::iter::repeat_n(0.0, m))
            .collect(),
        upper: problem
            .control_bounds
            .iter()
            .map(|b| b.1)
            .chain(std::iter::repeat_n(0.0, m))
            .collect(),
    };
    let set_slack_box = |bounds: &mut BoxBounds, active: bool| {
        let cap = if active { w.alpha_max } else { 0.0 };
        for v in &mut bounds.upper[m..] {
            *v = cap;
        }
    };
    set_slack_box(&mut bounds, slack_active);

    let mut x = match usable {
        Some(ws) => ws.x.clone(),
        None => vec![0.0; 2 * m],
    };
    bounds.project(&mut x);
    if objective(&x, problem, None).is_err() {
        x = vec![0.0; 2 * m];
        bounds.project(&mut x);
        objective(&x, problem, None)?;
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut previous_violation = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        let inner = {
            let penalty = Penalty {
                rho,
                mu_lower: &mu_lower,
                mu_upper: &mu_upper,
            };
            minimize_box(
                problem,
                &penalty,
                x.clone(),
                &bounds,
                w.tolerance,
                w.max_iterations,
            )
        };
        let Some(inner) = inner else { break };
        iterations += inner.iterations;
        x = inner.x;

        let states = rollout(problem.init, &x[..m], w.step, w.l_r, w.eps_guard)?;
        let d: Vec<f64> = states.iter().map(|s| s.d).collect();
        let violation = relaxed_violation(&d, &x[m..], problem);
        if violation <= CONSTRAINT_TOL {
            converged = inner.converged;
            break;
        }

        for k in 1..n {
            let a = x[m + k - 1];
            mu_lower[k - 1] = (mu_lower[k - 1] + rho * (c.d_lb[k] - a - d[k])).max(0.0);
            mu_upper[k - 1] = (mu_upper[k - 1] + rho * (d[k] - c.d_ub[k] - a)).max(0.0);
        }
        if violation > 0.25 * previous_violation {
            rho = (rho * 10.0).min(MAX_PENALTY);
        }
        previous_violation = violation;
        if !slack_active && rho >= SLACK_TRIGGER_PENALTY {
            slack_active = true;
            set_slack_box(&mut bounds, true);
            rho = INITIAL_PENALTY.max(rho / 100.0);
            previous_violation = f64::INFINITY;
        }
    }

    let warm_start = WarmStart {
        x: x.clone(),
        mu_lower,
        mu_upper,
        rho,
        slack_active,
    };

    let path = rollout(problem.init, &x[..m], w.step, w.l_r, w.eps_guard)?;
    let mut controls = ControlSequence::from_vector(&x);
    let mut max_violation: f64 = 0.0;
    for k in 1..n {
        let needed = (c.d_lb[k] - path[k].d).max(path[k].d - c.d_ub[k]).max(0.0);
        max_violation = max_violation.max(needed);
        let a = &mut controls.alpha[k - 1];
        *a = a.max(needed).clamp(0.0, w.alpha_max);
    }
    let status = if max_violation > w.alpha_max + CONSTRAINT_TOL {
        SolveStatus::Infeasible
    } else if converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIter
    };
    let cost = objective(&controls.to_vector(), problem, None)?.0;

    Ok(PlannerSolution {
        path,
        controls,
        cost,
        iterations,
        max_violation,
        solve_time: started.elapsed().as_secs_f64(),
        status,
        warm_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Corridor;
    use crate::optimizer::{PlannerWeights, Prediction, SpaceState};

    fn fig4_corridor(w: &PlannerWeights) -> Corridor {
        let mut c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        for k in 10..=20 {
            c.d_lb[k] = -1.0;
        }
        c
    }

    fn assert_feasible(sol: &PlannerSolution, problem: &PathProblem<'_>) {
        let c = problem.corridor;
        let w = problem.weights;
        for k in 1..sol.path.len() {
            let a = sol.controls.alpha[k - 1];
            assert!(a <= w.alpha_max && a >= 0.0);
            assert!(
                c.d_lb[k] - a - 1e-6 <= sol.path[k].d,
                "k={k} d={}",
                sol.path[k].d
            );
            assert!(sol.path[k].d <= c.d_ub[k] + a + 1e-6, "k={k}");
        }
        for (u, (lo, hi)) in sol.controls.u.iter().zip(&problem.control_bounds) {
            assert!(u >= lo && u <= hi);
        }
    }

    #[test]
    fn open_road_stays_on_reference() {
        let w = PlannerWeights {
            lambda_risk: 0.0,
            ..Default::default()
        };
        let c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        let problem = PathProblem::new(&c, &[], &w, SpaceState::default());
        let sol = solve(&problem, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.path.iter().all(|s| s.d.abs() < 1e-6));
        assert!(sol.controls.u.iter().all(|u| u.abs() < 1e-6));
        assert_eq!(sol.path[0], SpaceState::default());
    }

    #[test]
    fn rises_over_raised_lower_bound() {
        let w = PlannerWeights::default();
        let c = fig4_corridor(&w);
        let problem = PathProblem::new(&c, &[], &w, SpaceState::new(0.0, -2.0, 0.0));
        let sol = solve(&problem, None).unwrap();
        assert_ne!(sol.status, SolveStatus::Infeasible);
        assert!(sol.max_violation <= w.alpha_max + 1e-6);
        assert_feasible(&sol, &problem);
        // Smooth rise up to the obstacle: monotone before station 10.
        for k in 1..10 {
            assert!(sol.path[k].d >= sol.path[k - 1].d - 1e-9, "k={k}");
        }
        for k in 10..=20 {
            assert!(sol.path[k].d >= -1.0 - 1e-6);
        }
        assert!(sol.slack_sum() < 1e-6);
        let c_step = w.step / w.l_r;
        for k in 0..sol.controls.len() {
            let dphi = sol.path[k + 1].phi - sol.path[k].phi;
            let bound = c_step * 0.3f64.sin() / (sol.path[k].phi + sol.controls.u[k]).cos();
            assert!(dphi.abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn oncoming_prediction_pushes_path_down() {
        let base = PlannerWeights {
            lambda_dyn: 0.0,
            ..Default::default()
        };
        let w = PlannerWeights::default();
        let mut c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        // Tighten both sides symmetrically so the centering term is active.
        for k in 20..40 {
            c.d_lb[k] = -3.0;
            c.d_ub[k] = 3.0;
        }
        let mut pred: Prediction = vec![None; w.horizon];
        for slot in pred.iter_mut().take(45).skip(20) {
            *slot = Some(2.5);
        }
        let dyns = [pred.clone()];
        let reference = solve(
            &PathProblem::new(&c, &[], &base, SpaceState::default()),
            None,
        )
        .unwrap();
        let shifted = solve(
            &PathProblem::new(&c, &dyns, &w, SpaceState::default()),
            None,
        )
        .unwrap();
        for k in 20..45 {
            assert!(shifted.path[k].d < reference.path[k].d, "k={k}");
        }
    }

    #[test]
    fn warm_restart_is_immediate() {
        let w = PlannerWeights::default();
        let c = fig4_corridor(&w);
        let problem = PathProblem::new(&c, &[], &w, SpaceState::new(0.0, -2.0, 0.0));
        let first = solve(&problem, None).unwrap();
        let again = solve(&problem, Some(&first.warm_start)).unwrap();
        assert!(again.iterations <= 3, "{}", again.iterations);
        assert_eq!(again.status, first.status);
    }

    #[test]
    fn narrow_gap_uses_slack() {
        let w = PlannerWeights::default();
        let mut c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        // Bounds cross by 0.2 m at stations 30..35.
        for k in 30..35 {
            c.d_lb[k] = 0.1;
            c.d_ub[k] = -0.1;
        }
        let problem = PathProblem::new(&c, &[], &w, SpaceState::default());
        let sol = solve(&problem, None).unwrap();
        assert_ne!(sol.status, SolveStatus::Infeasible);
        assert!(sol.max_violation > 0.05 && sol.max_violation <= w.alpha_max + 1e-6);
        assert!(sol.slack_sum() > 0.0);
        assert_feasible(&sol, &problem);
    }

    #[test]
    fn crossed_beyond_slack_is_infeasible() {
        let w = PlannerWeights::default();
        let mut c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        for k in 30..35 {
            c.d_lb[k] = 1.0;
            c.d_ub[k] = -1.0;
        }
        let problem = PathProblem::new(&c, &[], &w, SpaceState::default());
        let sol = solve(&problem, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.max_violation > w.alpha_max);
    }

    #[test]
    fn initial_state_outside_is_rejected() {
        let w = PlannerWeights::default();
        let c = Corridor::open(-1.0, 1.0, w.horizon, w.step, 0.0);
        let problem = PathProblem::new(&c, &[], &w, SpaceState::new(0.0, 1.5, 0.0));
        assert!(matches!(
            solve(&problem, None),
            Err(PlanError::InitialStateOutside { .. })
        ));
    }
}
