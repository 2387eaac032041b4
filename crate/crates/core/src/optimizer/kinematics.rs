//! Space-domain bicycle kinematics in the Frenet frame.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("steering angle {0} rad outside (-pi/2, pi/2)")]
    DomainError(f64),
    #[error("heading {angle:.4} rad within the singularity guard (limit {limit:.4})")]
    SingularityGuard { angle: f64, limit: f64 },
    #[error(
        "reference curvature at step {step} exceeds steering authority ({lower:.4} > {upper:.4})"
    )]
    EmptyActuationSet { step: usize, lower: f64, upper: f64 },
}

/// Station, lateral offset and heading relative to the reference tangent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceState {
    pub s: f64,
    pub d: f64,
    pub phi: f64,
}

impl SpaceState {
    pub const fn new(s: f64, d: f64, phi: f64) -> Self {
        Self { s, d, phi }
    }
}

/// Rear-axle ratio `l_r / (l_f + l_r)`.
pub fn axle_ratio(l_f: f64, l_r: f64) -> f64 {
    l_r / (l_f + l_r)
}

fn check_steering(delta: f64) -> Result<(), KinematicsError> {
    if delta.abs() >= FRAC_PI_2 || !delta.is_finite() {
        return Err(KinematicsError::DomainError(delta));
    }
    Ok(())
}

/// Slip angle of the kinematic bicycle: `atan(a tan delta)`.
pub fn beta_exact(delta: f64, l_f: f64, l_r: f64) -> Result<f64, KinematicsError> {
    check_steering(delta)?;
    Ok((axle_ratio(l_f, l_r) * delta.tan()).atan())
}

/// Linear slip proxy `a * delta`, an under-approximation of [`beta_exact`]
/// in magnitude on `(-pi/2, pi/2)`.
pub fn beta_approx(delta: f64, l_f: f64, l_r: f64) -> Result<f64, KinematicsError> {
    check_steering(delta)?;
    Ok(axle_ratio(l_f, l_r) * delta)
}

/// Guard check `|phi + u| <= pi/2 - eps_guard`.
pub fn check_guard(phi: f64, u: f64, eps_guard: f64) -> Result<(), KinematicsError> {
    let angle = phi + u;
    let limit = FRAC_PI_2 - eps_guard;
    if !(angle.abs() <= limit) {
        return Err(KinematicsError::SingularityGuard { angle, limit });
    }
    Ok(())
}

/// One longitudinal step of length `step`:
///
/// ```text
/// s'   = s + step
/// d'   = d + tan(phi + u) step
/// phi' = phi + step / l_r * sin(u) / cos(phi + u)
/// ```
pub fn propagate(
    state: SpaceState,
    u: f64,
    step: f64,
    l_r: f64,
    eps_guard: f64,
) -> Result<SpaceState, KinematicsError> {
    check_guard(state.phi, u, eps_guard)?;
    let theta = state.phi + u;
    Ok(SpaceState {
        s: state.s + step,
        d: state.d + theta.tan() * step,
        phi: state.phi + step / l_r * u.sin() / theta.cos(),
    })
}

/// Steering proxy needed to follow a reference heading change of
/// `heading_delta` over one step: `atan(l_r / step * heading_delta)`.
pub fn reference_steering(heading_delta: f64, step: f64, l_r: f64) -> f64 {
    (l_r / step * heading_delta).atan()
}

/// Box for `u_k` such that `u_k + u_ref_k` stays within the nominal
/// steering-proxy limits.
pub fn curvature_bounds_from_delta(
    k: usize,
    heading_delta: f64,
    step: f64,
    l_f: f64,
    l_r: f64,
    delta_min: f64,
    delta_max: f64,
) -> Result<(f64, f64), KinematicsError> {
    let a = axle_ratio(l_f, l_r);
    let u_ref = reference_steering(heading_delta, step, l_r);
    let lower = a * delta_min - u_ref;
    let upper = a * delta_max - u_ref;
    if lower > upper || u_ref < a * delta_min || u_ref > a * delta_max {
        return Err(KinematicsError::EmptyActuationSet {
            step: k,
            lower,
            upper,
        });
    }
    Ok((lower, upper))
}
