//! Decision governor: picks the deviation side for each static obstacle.
//!
//! An obstacle labelled [`DeviationLabel::Lower`] bounds the corridor from
//! below, so the ego passes above it (larger `d`); `Upper` is the mirror
//! case. The gap on each side is measured between the obstacle and the road
//! limits and compared against the ego width plus clearance on both sides.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obstacles::{ObstaclePolygon, ObstacleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviationLabel {
    Lower,
    Upper,
    Risk,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviationDecision {
    pub label: DeviationLabel,
    pub lower_gap: f64,
    pub upper_gap: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GovernorError {
    #[error(
        "no passable gap (lower {lower_gap:.3} m, upper {upper_gap:.3} m, need {required:.3} m)"
    )]
    Blocked {
        lower_gap: f64,
        upper_gap: f64,
        required: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GovernorConfig {
    /// Lateral clearance required on each side of the ego (m).
    pub clearance: f64,
    /// A label flips only when the new side's gap beats the incumbent's by this much (m).
    pub hysteresis: f64,
    /// Defer doubly passable obstacles to the optimizer as risks.
    pub risk_mode: bool,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            clearance: 0.25,
            hysteresis: 0.3,
            risk_mode: false,
        }
    }
}

/// Classifies one static obstacle with the decision tree, without memory.
pub fn classify_obstacle(
    poly: &ObstaclePolygon,
    road_lb: f64,
    road_ub: f64,
    ego_width: f64,
    clearance: f64,
) -> Result<DeviationDecision, GovernorError> {
    decide(
        poly, road_lb, road_ub, ego_width, clearance, false, None, 0.0,
    )
}

#[allow(clippy::too_many_arguments)]
fn decide(
    poly: &ObstaclePolygon,
    road_lb: f64,
    road_ub: f64,
    ego_width: f64,
    clearance: f64,
    risk_mode: bool,
    previous: Option<DeviationLabel>,
    hysteresis: f64,
) -> Result<DeviationDecision, GovernorError> {
    let (d_min, d_max) = poly.d_range();
    let lower_gap = (d_min - road_lb).max(0.0);
    let upper_gap = (road_ub - d_max).max(0.0);
    let required = ego_width + 2.0 * clearance;
    let decision = |label| DeviationDecision {
        label,
        lower_gap,
        upper_gap,
    };

    match (lower_gap >= required, upper_gap >= required) {
        (false, false) => Err(GovernorError::Blocked {
            lower_gap,
            upper_gap,
            required,
        }),
        // Only the upper gap is usable: the obstacle bounds the corridor from below.
        (false, true) => Ok(decision(DeviationLabel::Lower)),
        (true, false) => Ok(decision(DeviationLabel::Upper)),
        (true, true) if risk_mode => Ok(decision(DeviationLabel::Risk)),
        (true, true) => {
            let preferred = if upper_gap > lower_gap {
                DeviationLabel::Lower
            } else if lower_gap > upper_gap {
                DeviationLabel::Upper
            } else if d_max < 0.0 {
                // Upper gap contains d = 0.
                DeviationLabel::Lower
            } else if d_min > 0.0 {
                DeviationLabel::Upper
            } else {
                DeviationLabel::Lower
            };
            let gap_of = |label| match label {
                DeviationLabel::Lower => upper_gap,
                _ => lower_gap,
            };
            let label = match previous {
                Some(prev @ (DeviationLabel::Lower | DeviationLabel::Upper))
                    if prev != preferred && gap_of(preferred) <= gap_of(prev) + hysteresis =>
                {
                    prev
                }
                _ => preferred,
            };
            Ok(decision(label))
        }
    }
}

/// Indices into [`ObstacleSet::all`] for each output set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub risk: Vec<usize>,
}

/// Stateful governor carrying per-obstacle labels between cycles.
#[derive(Clone, Debug, Default)]
pub struct DecisionGovernor {
    pub config: GovernorConfig,
    memory: HashMap<usize, DeviationLabel>,
}

impl DecisionGovernor {
    pub fn new(config: GovernorConfig) -> Self {
        Self {
            config,
            memory: HashMap::new(),
        }
    }

    pub fn remembered(&self, key: usize) -> Option<DeviationLabel> {
        self.memory.get(&key).copied()
    }

    pub fn classify(
        &mut self,
        poly: &ObstaclePolygon,
        road_lb: f64,
        road_ub: f64,
        ego_width: f64,
    ) -> Result<DeviationDecision, GovernorError> {
        let previous = poly.key().and_then(|k| self.remembered(k));
        let decision = decide(
            poly,
            road_lb,
            road_ub,
            ego_width,
            self.config.clearance,
            self.config.risk_mode,
            previous,
            self.config.hysteresis,
        )?;
        if let Some(key) = poly.key() {
            self.memory.insert(key, decision.label);
        }
        Ok(decision)
    }

    /// Splits the static obstacles of `set` into disjoint lower, upper and
    /// risk sets. Dynamic obstacles are not classified.
    pub fn partition(
        &mut self,
        set: &ObstacleSet,
        road_lb: f64,
        road_ub: f64,
        ego_width: f64,
    ) -> Result<Partition, GovernorError> {
        let mut out = Partition::default();
        for (i, poly) in set.all.iter().enumerate() {
            if poly.is_dynamic {
                continue;
            }
            match self.classify(poly, road_lb, road_ub, ego_width)?.label {
                DeviationLabel::Lower => out.lower.push(i),
                DeviationLabel::Upper => out.upper.push(i),
                DeviationLabel::Risk => out.risk.push(i),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frenet::FrenetPoint;
    use crate::obstacles::convex_hull;

    fn slab(d_lo: f64, d_hi: f64) -> ObstaclePolygon {
        let pts = [
            FrenetPoint::new(10.0, d_lo),
            FrenetPoint::new(14.0, d_lo),
            FrenetPoint::new(14.0, d_hi),
            FrenetPoint::new(10.0, d_hi),
        ];
        convex_hull(&pts, 0.3, 0.25).with_ids(vec![7])
    }

    #[test]
    fn parked_car_on_the_right_is_passed_above() {
        let d = classify_obstacle(&slab(-3.0, -1.0), -3.5, 3.5, 2.0, 0.25).unwrap();
        assert_eq!(d.label, DeviationLabel::Lower);
        assert!((d.lower_gap - 0.5).abs() < 1e-12);
        assert!((d.upper_gap - 4.5).abs() < 1e-12);
    }

    #[test]
    fn mirror_case_is_upper() {
        let d = classify_obstacle(&slab(1.0, 3.0), -3.5, 3.5, 2.0, 0.25).unwrap();
        assert_eq!(d.label, DeviationLabel::Upper);
    }

    #[test]
    fn full_width_obstacle_blocks() {
        let err = classify_obstacle(&slab(-2.5, 2.5), -3.5, 3.5, 2.0, 0.25).unwrap_err();
        assert!(matches!(err, GovernorError::Blocked { .. }));
    }

    #[test]
    fn centred_tie_falls_back_to_lower() {
        let d = classify_obstacle(&slab(-0.75, 0.75), -3.5, 3.5, 2.0, 0.25).unwrap();
        assert_eq!((d.lower_gap, d.upper_gap), (2.75, 2.75));
        assert_eq!(d.label, DeviationLabel::Lower);
    }

    #[test]
    fn tie_prefers_gap_containing_zero() {
        // Obstacle entirely above the reference: lower gap contains d = 0.
        let d = classify_obstacle(&slab(0.5, 1.5), -2.5, 4.5, 2.0, 0.25).unwrap();
        assert_eq!(d.lower_gap, d.upper_gap);
        assert_eq!(d.label, DeviationLabel::Upper);
    }

    #[test]
    fn risk_mode_defers_doubly_passable() {
        let mut gov = DecisionGovernor::new(GovernorConfig {
            risk_mode: true,
            ..Default::default()
        });
        let d = gov.classify(&slab(-0.75, 0.75), -3.5, 3.5, 2.0).unwrap();
        assert_eq!(d.label, DeviationLabel::Risk);
        // A one-sided obstacle is still bounded.
        assert_eq!(
            gov.classify(&slab(-3.0, -1.0), -3.5, 3.5, 2.0)
                .unwrap()
                .label,
            DeviationLabel::Lower
        );
    }

    #[test]
    fn hysteresis_holds_label_against_small_noise() {
        let mut gov = DecisionGovernor::default();
        assert_eq!(
            gov.classify(&slab(-0.9, 0.6), -3.5, 3.5, 2.0)
                .unwrap()
                .label,
            DeviationLabel::Lower
        );
        // Lower gap now wins by 0.2 m only: keep Lower.
        assert_eq!(
            gov.classify(&slab(-0.65, 0.85), -3.5, 3.5, 2.0)
                .unwrap()
                .label,
            DeviationLabel::Lower
        );
        // Lower gap wins by 0.6 m: flip.
        assert_eq!(
            gov.classify(&slab(-0.3, 1.2), -3.5, 3.5, 2.0)
                .unwrap()
                .label,
            DeviationLabel::Upper
        );
    }

    #[test]
    fn forced_side_overrides_memory() {
        let mut gov = DecisionGovernor::default();
        gov.classify(&slab(-0.9, 0.6), -3.5, 3.5, 2.0).unwrap();
        assert_eq!(
            gov.classify(&slab(0.5, 2.5), -3.5, 3.5, 2.0).unwrap().label,
            DeviationLabel::Upper
        );
    }
}
