//! Post-collision velocity along a one-parameter family of controls that
//! crosses a change in the step at which the first ball-ball contact is
//! detected.
//!
//! The family is the scenario's constant initial control plus
//! `(lateral, alpha)`. A non-zero lateral component makes the impact
//! oblique, so both the impact velocity and the contact normal matter.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::{rollout, ContactConfig, ContactPair, Scenario};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    /// Ball 2 velocity right after the first ball-ball impulse.
    pub v2: Vec2,
    pub contact_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub toi_velocity: bool,
    pub spacing: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    /// Largest change in post-collision velocity between neighbouring grid points.
    pub fn max_adjacent_difference(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].v2 - w[0].v2).length())
            .fold(0.0, f64::max)
    }

    /// Whether the grid spans more than one contact step.
    pub fn crosses_shift(&self) -> bool {
        self.points.windows(2).any(|w| w[0].contact_step != w[1].contact_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub lateral: f64,
    /// Parameter value at which the first contact moves to another step.
    pub alpha_shift: f64,
    pub curves: Vec<SweepCurve>,
}

impl ContinuityReport {
    pub fn curve(&self, toi_velocity: bool, spacing: f64) -> Option<&SweepCurve> {
        self.curves
            .iter()
            .find(|c| c.toi_velocity == toi_velocity && c.spacing == spacing)
    }
}

fn family(scenario: &Scenario, lateral: f64, alpha: f64) -> Vec<Vec2> {
    vec![scenario.initial_control + Vec2::new(lateral, alpha); scenario.steps]
}

fn first_impact(scenario: &Scenario, contact: &ContactConfig, lateral: f64, alpha: f64) -> Result<SweepPoint> {
    let traj = rollout(scenario, contact, &family(scenario, lateral, alpha))?;
    let event = traj
        .events
        .iter()
        .find(|e| e.pair == ContactPair::BallBall)
        .ok_or_else(|| SimError::Config(format!("no ball-ball contact at alpha = {alpha}")))?;
    Ok(SweepPoint {
        alpha,
        v2: event.velocities_after[1],
        contact_step: event.step,
    })
}

/// Bisects for the parameter at which the first contact step changes,
/// searching upward from `alpha = 0`.
pub fn locate_contact_shift(scenario: &Scenario, contact: &ContactConfig, lateral: f64) -> Result<f64> {
    const PROBE: f64 = 1e-3;
    let base = first_impact(scenario, contact, lateral, 0.0)?.contact_step;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=2000 {
        let alpha = k as f64 * PROBE;
        if first_impact(scenario, contact, lateral, alpha)?.contact_step != base {
            hi = Some(alpha);
            break;
        }
        lo = alpha;
    }
    let mut hi = hi.ok_or_else(|| SimError::Config("contact step never changes along the sweep".into()))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if first_impact(scenario, contact, lateral, mid)?.contact_step == base {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sweeps `2 * half_points` values centered on the contact shift for each
/// spacing, with the velocity correction off and on (position correction on).
pub fn continuity_sweep(
    scenario: &Scenario,
    lateral: f64,
    spacings: &[f64],
    half_points: usize,
) -> Result<ContinuityReport> {
    let on = ContactConfig::direct(true, true);
    let alpha_shift = locate_contact_shift(scenario, &on, lateral)?;
    let mut curves = Vec::new();
    for &spacing in spacings {
        for toi_velocity in [false, true] {
            let contact = ContactConfig::direct(true, toi_velocity);
            let points = (0..2 * half_points)
                .map(|j| {
                    let offset = j as f64 - half_points as f64 + 0.5;
                    first_impact(scenario, &contact, lateral, alpha_shift + offset * spacing)
                })
                .collect::<Result<Vec<_>>>()?;
            curves.push(SweepCurve {
                toi_velocity,
                spacing,
                points,
            });
        }
    }
    Ok(ContinuityReport {
        lateral,
        alpha_shift,
        curves,
    })
}
