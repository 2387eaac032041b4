//! Single-shooting cost with reverse-mode gradient.

use super::kinematics::{propagate, KinematicsError, SpaceState};
use super::{ControlSequence, PathProblem};

/// Augmented-Lagrangian terms for the bound constraints
/// `d_lb - alpha - d <= 0` and `d - d_ub - alpha <= 0`.
#[derive(Clone, Debug)]
pub(crate) struct Penalty<'a> {
    pub rho: f64,
    pub mu_lower: &'a [f64],
    pub mu_upper: &'a [f64],
}

/// Rolls the kinematics out from `init` over `u`.
pub fn rollout(
    init: SpaceState,
    u: &[f64],
    step: f64,
    l_r: f64,
    eps_guard: f64,
) -> Result<Vec<SpaceState>, KinematicsError> {
    let mut states = Vec::with_capacity(u.len() + 1);
    states.push(init);
    let mut state = init;
    for &uk in u {
        state = propagate(state, uk, step, l_r, eps_guard)?;
        states.push(state);
    }
    Ok(states)
}

/// Cost and gradient over `[u_0..u_{N-2}, alpha_1..alpha_{N-1}]`, without
/// constraint terms.
pub fn evaluate_cost(
    controls: &ControlSequence,
    problem: &PathProblem<'_>,
) -> Result<(f64, Vec<f64>), KinematicsError> {
    let x = controls.to_vector();
    objective(&x, problem, None)
}

fn phr(g: f64, mu: f64, rho: f64) -> (f64, f64) {
    let shifted = (mu + rho * g).max(0.0);
    ((shifted * shifted - mu * mu) / (2.0 * rho), shifted)
}

pub(crate) fn objective(
    x: &[f64],
    problem: &PathProblem<'_>,
    penalty: Option<&Penalty<'_>>,
) -> Result<(f64, Vec<f64>), KinematicsError> {
    let w = problem.weights;
    let m = problem.controls_len();
    let (u, alpha) = x.split_at(m);
    let states = rollout(problem.init, u, w.step, w.l_r, w.eps_guard)?;
    let corridor = problem.corridor;

    let mut cost = 0.0;
    let mut grad = vec![0.0; 2 * m];
    // Direct partial derivative of the cost with respect to d_k.
    let mut d_grad = vec![0.0; m + 1];

    for j in 0..m {
        let t = u[j].tan();
        cost += w.q_u * u[j] * u[j] + w.lambda_curve * t * t;
        grad[j] += 2.0 * w.q_u * u[j] + 2.0 * w.lambda_curve * t * (1.0 + t * t);
        cost += w.lambda_alpha * alpha[j] * alpha[j];
        grad[m + j] += 2.0 * w.lambda_alpha * alpha[j];
    }

    for k in 1..=m {
        let d = states[k].d;
        cost += w.q_d * d * d;
        d_grad[k] += 2.0 * w.q_d * d;

        if w.lambda_risk > 0.0 && corridor.is_tightened(k) {
            let off = d - corridor.midline(k);
            cost += w.lambda_risk * off * off;
            d_grad[k] += 2.0 * w.lambda_risk * off;
        }

        if w.lambda_dyn > 0.0 {
            for prediction in problem.dynamics {
                if let Some(Some(predicted)) = prediction.get(k) {
                    let r = predicted - d;
                    let denom = r * r + w.eps_dyn;
                    cost += w.lambda_dyn / denom;
                    d_grad[k] += w.lambda_dyn * 2.0 * r / (denom * denom);
                }
            }
        }

        if let Some(p) = penalty {
            let a = alpha[k - 1];
            let (v, s) = phr(corridor.d_lb[k] - a - d, p.mu_lower[k - 1], p.rho);
            cost += v;
            d_grad[k] -= s;
            grad[m + k - 1] -= s;
            let (v, s) = phr(d - corridor.d_ub[k] - a, p.mu_upper[k - 1], p.rho);
            cost += v;
            d_grad[k] += s;
            grad[m + k - 1] -= s;
        }
    }

    // Reverse sweep through the rollout.
    let c = w.step / w.l_r;
    let mut adj_d = d_grad[m];
    let mut adj_phi = 0.0;
    for j in (0..m).rev() {
        let phi = states[j].phi;
        let theta = phi + u[j];
        let (sin_u, cos_u) = u[j].sin_cos();
        let (sin_t, cos_t) = theta.sin_cos();
        let sec2 = 1.0 / (cos_t * cos_t);
        let dd = w.step * sec2;
        let cross = sin_u * sin_t * sec2;
        let dphi_dphi = 1.0 + c * cross;
        let dphi_du = c * (cos_u / cos_t + cross);

        grad[j] += adj_d * dd + adj_phi * dphi_du;
        let next_adj_phi = adj_d * dd + adj_phi * dphi_dphi;
        adj_d += d_grad[j];
        adj_phi = next_adj_phi;
    }

    Ok((cost, grad))
}

/// Gauss-Newton model of the objective's Hessian.
///
/// With `J = dd/du` (station `k` in row `k - 1`), the model is
///
/// ```text
/// H_uu = J' diag(station) J + diag(control)
/// H_ua = J' diag(coupling)
/// H_aa = diag(slack)
/// ```
///
/// Second-order terms of the kinematics are dropped and the dynamic-risk
/// curvature is clipped at zero, so the model is positive semidefinite.
pub(crate) struct Curvature {
    pub m: usize,
    /// Row-major `m x m`, lower triangular.
    pub jacobian: Vec<f64>,
    pub station: Vec<f64>,
    pub coupling: Vec<f64>,
    pub slack: Vec<f64>,
    pub control: Vec<f64>,
}

pub(crate) fn curvature(
    x: &[f64],
    problem: &PathProblem<'_>,
    penalty: &Penalty<'_>,
) -> Result<Curvature, KinematicsError> {
    let w = problem.weights;
    let m = problem.controls_len();
    let (u, alpha) = x.split_at(m);
    let states = rollout(problem.init, u, w.step, w.l_r, w.eps_guard)?;
    let corridor = problem.corridor;
    let c = w.step / w.l_r;

    let mut jacobian = vec![0.0; m * m];
    let mut sens_d = vec![0.0; m];
    let mut sens_phi = vec![0.0; m];
    for i in 0..m {
        let theta = states[i].phi + u[i];
        let (sin_u, cos_u) = u[i].sin_cos();
        let (sin_t, cos_t) = theta.sin_cos();
        let sec2 = 1.0 / (cos_t * cos_t);
        let dd = w.step * sec2;
        let cross = sin_u * sin_t * sec2;
        for j in 0..i {
            sens_d[j] += dd * sens_phi[j];
            sens_phi[j] *= 1.0 + c * cross;
        }
        sens_d[i] = dd;
        sens_phi[i] = c * (cos_u / cos_t + cross);
        jacobian[i * m..i * m + i + 1].copy_from_slice(&sens_d[..=i]);
    }

    let mut station = vec![0.0; m];
    let mut coupling = vec![0.0; m];
    let mut slack = vec![2.0 * w.lambda_alpha; m];
    let mut control = vec![0.0; m];
    for j in 0..m {
        let t = u[j].tan();
        let sec2 = 1.0 + t * t;
        control[j] = 2.0 * w.q_u + w.lambda_curve * (2.0 * sec2 * sec2 + 4.0 * t * t * sec2);
    }
    for k in 1..=m {
        let r_idx = k - 1;
        let d = states[k].d;
        let mut h = 2.0 * w.q_d;
        if w.lambda_risk > 0.0 && corridor.is_tightened(k) {
            h += 2.0 * w.lambda_risk;
        }
        if w.lambda_dyn > 0.0 {
            for prediction in problem.dynamics {
                if let Some(Some(predicted)) = prediction.get(k) {
                    let r = predicted - d;
                    let denom = r * r + w.eps_dyn;
                    h += (w.lambda_dyn * (6.0 * r * r - 2.0 * w.eps_dyn) / denom.powi(3)).max(0.0);
                }
            }
        }
        let a = alpha[r_idx];
        if penalty.mu_lower[r_idx] + penalty.rho * (corridor.d_lb[k] - a - d) > 0.0 {
            h += penalty.rho;
            coupling[r_idx] += penalty.rho;
            slack[r_idx] += penalty.rho;
        }
        if penalty.mu_upper[r_idx] + penalty.rho * (d - corridor.d_ub[k] - a) > 0.0 {
            h += penalty.rho;
            coupling[r_idx] -= penalty.rho;
            slack[r_idx] += penalty.rho;
        }
        station[r_idx] = h;
    }

    Ok(Curvature {
        m,
        jacobian,
        station,
        coupling,
        slack,
        control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Corridor;
    use crate::optimizer::PlannerWeights;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tight_corridor(n: usize) -> Corridor {
        let mut c = Corridor::open(-3.5, 3.5, n, 1.0, 0.0);
        for k in 10..20.min(n) {
            c.d_lb[k] = -1.0;
        }
        c
    }

    #[test]
    fn zero_cost_on_centerline() {
        let w = PlannerWeights::default();
        let c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        let problem = PathProblem::new(&c, &[], &w, SpaceState::default());
        let (cost, grad) = evaluate_cost(&ControlSequence::zeros(w.horizon - 1), &problem).unwrap();
        assert_eq!(cost, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_dynamic_prediction_sum() {
        let w = PlannerWeights {
            lambda_dyn: 5.0,
            eps_dyn: 0.0,
            ..Default::default()
        };
        let c = Corridor::open(-3.5, 3.5, w.horizon, w.step, 0.0);
        let mut prediction = vec![None; w.horizon];
        for slot in prediction.iter_mut().take(41).skip(20) {
            *slot = Some(3.0);
        }
        let dyns = [prediction];
        let problem = PathProblem::new(&c, &dyns, &w, SpaceState::default());
        let (cost, _) = evaluate_cost(&ControlSequence::zeros(w.horizon - 1), &problem).unwrap();
        assert!((cost - 5.0 * 21.0 / 9.0).abs() < 1e-12, "{cost}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = PlannerWeights::default();
        let c = tight_corridor(w.horizon);
        let mut prediction = vec![None; w.horizon];
        for (k, slot) in prediction.iter_mut().enumerate().skip(15).take(30) {
            *slot = Some(2.5 - 0.02 * k as f64);
        }
        let dyns = [prediction];
        let problem = PathProblem::new(&c, &dyns, &w, SpaceState::new(0.0, -0.5, 0.05));
        let mu: Vec<f64> = (0..w.horizon - 1).map(|k| 0.1 * (k % 3) as f64).collect();
        let penalty = Penalty {
            rho: 50.0,
            mu_lower: &mu,
            mu_upper: &mu,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = w.horizon - 1;
            let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.05..0.05)).collect();
            x.extend((0..m).map(|_| rng.gen_range(0.0..0.3)));
            for pen in [None, Some(&penalty)] {
                let (_, grad) = objective(&x, &problem, pen).unwrap();
                let h = 1e-6;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (objective(&xp, &problem, pen).unwrap().0
                        - objective(&xm, &problem, pen).unwrap().0)
                        / (2.0 * h);
                    let rel = (fd - grad[i]).abs() / grad[i].abs().max(fd.abs()).max(1.0);
                    assert!(rel < 1e-4, "i={i} fd={fd} an={}", grad[i]);
                }
            }
        }
    }

    #[test]
    fn sensitivity_matches_rollout_differences() {
        let w = PlannerWeights::default();
        let c = tight_corridor(w.horizon);
        let init = SpaceState::new(0.0, 0.3, -0.1);
        let problem = PathProblem::new(&c, &[], &w, init);
        let m = w.horizon - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.2..0.2)).collect();
        x.extend(vec![0.0; m]);
        let zeros = vec![0.0; m];
        let penalty = Penalty {
            rho: 1.0,
            mu_lower: &zeros,
            mu_upper: &zeros,
        };
        let curv = curvature(&x, &problem, &penalty).unwrap();
        let h = 1e-6;
        for j in [0, 7, 30, m - 1] {
            let mut xp = x[..m].to_vec();
            let mut xm = x[..m].to_vec();
            xp[j] += h;
            xm[j] -= h;
            let sp = rollout(init, &xp, w.step, w.l_r, w.eps_guard).unwrap();
            let sm = rollout(init, &xm, w.step, w.l_r, w.eps_guard).unwrap();
            for r in 0..m {
                let fd = (sp[r + 1].d - sm[r + 1].d) / (2.0 * h);
                assert!((fd - curv.jacobian[r * m + j]).abs() < 1e-5 * fd.abs().max(1.0));
            }
        }
    }
}
