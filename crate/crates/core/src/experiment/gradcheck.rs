//! Adjoint gradients against central finite differences.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::continuity::ContinuityReport;
use crate::error::Result;
use crate::objective::{objective_gradient, running_cost, terminal_cost, ObjectiveConfig};
use crate::sim::{rollout, ContactConfig, ContactPair, Scenario};
use crate::vec2::Vec2;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }

    fn get(self, v: Vec2) -> f64 {
        match self {
            Axis::X => v.x,
            Axis::Y => v.y,
        }
    }

    fn nudge(self, v: &mut Vec2, by: f64) {
        match self {
            Axis::X => v.x += by,
            Axis::Y => v.y += by,
        }
    }
}

/// One sampled control entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdProbe {
    pub step: usize,
    pub axis: Axis,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
    /// The contact sequence differs between `u - h` and `u + h`.
    pub branch_flip: bool,
}

type Signature = Vec<(usize, ContactPair, bool)>;

/// Terminal and running cost kept apart so their differences are taken
/// separately; the sum would round away small running-cost changes.
fn cost_terms(
    scenario: &Scenario,
    contact: &ContactConfig,
    objective: &ObjectiveConfig,
    controls: &[Vec2],
) -> Result<(f64, f64, Signature)> {
    let traj = rollout(scenario, contact, controls)?;
    let terminal = terminal_cost(traj.final_state(), objective.target);
    let dt = scenario.dt();
    let running = controls
        .iter()
        .fold(0.0, |acc, &u| acc + running_cost(u, objective.epsilon) * dt);
    let signature = traj.events.iter().map(|e| (e.step, e.pair, e.toi_clamped)).collect();
    Ok((terminal, running, signature))
}

/// `(f(u + h e) - f(u - h e)) / 2h` for one entry, and whether the contact
/// branch changes across the probe.
pub fn central_difference(
    scenario: &Scenario,
    contact: &ContactConfig,
    objective: &ObjectiveConfig,
    controls: &[Vec2],
    step: usize,
    axis: Axis,
    h: f64,
) -> Result<(f64, bool)> {
    let (_, _, base) = cost_terms(scenario, contact, objective, controls)?;
    let mut probe = controls.to_vec();
    axis.nudge(&mut probe[step], h);
    let (tp, rp, sp) = cost_terms(scenario, contact, objective, &probe)?;
    probe[step] = controls[step];
    axis.nudge(&mut probe[step], -h);
    let (tm, rm, sm) = cost_terms(scenario, contact, objective, &probe)?;
    let fd = ((tp - tm) + (rp - rm)) / (2.0 * h);
    Ok((fd, sp != base || sm != base))
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `count` distinct `(step, axis)` entries.
pub fn sample_entries<R: Rng>(steps: usize, count: usize, rng: &mut R) -> Vec<(usize, Axis)> {
    let total = steps * 2;
    index::sample(rng, total, count.min(total))
        .into_iter()
        .map(|k| (k / 2, if k % 2 == 0 { Axis::X } else { Axis::Y }))
        .collect()
}

/// Compares the adjoint gradient with central differences at `entries`.
pub fn check_gradient(
    scenario: &Scenario,
    contact: &ContactConfig,
    objective: &ObjectiveConfig,
    controls: &[Vec2],
    entries: &[(usize, Axis)],
    h: f64,
) -> Result<Vec<FdProbe>> {
    let eval = objective_gradient(scenario, contact, objective, controls)?;
    entries
        .iter()
        .map(|&(step, axis)| {
            let adjoint = axis.get(eval.gradient[step]);
            let (fd, flip) = central_difference(scenario, contact, objective, controls, step, axis, h)?;
            Ok(FdProbe {
                step,
                axis,
                adjoint,
                finite_difference: fd,
                rel_error: relative_error(adjoint, fd),
                branch_flip: flip,
            })
        })
        .collect()
}

/// Controls that push Ball 1 downward, away from Ball 2 and the wall, with
/// every component of magnitude in `[1, 2)`.
pub fn no_contact_controls<R: Rng>(scenario: &Scenario, rng: &mut R) -> Vec<Vec2> {
    (0..scenario.steps)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Vec2::new(sign * rng.gen_range(1.0..2.0), -rng.gen_range(1.0..2.0))
        })
        .collect()
}

/// The scenario's initial control with uniform noise of half-width `amplitude`.
pub fn perturbed_controls<R: Rng>(scenario: &Scenario, amplitude: f64, rng: &mut R) -> Vec<Vec2> {
    (0..scenario.steps)
        .map(|_| {
            scenario.initial_control
                + Vec2::new(
                    rng.gen_range(-amplitude..amplitude),
                    rng.gen_range(-amplitude..amplitude),
                )
        })
        .collect()
}

/// Output of `gradcheck`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub no_contact: Vec<FdProbe>,
    pub no_contact_events: usize,
    pub contact: Vec<FdProbe>,
    pub contact_events: usize,
    pub continuity: ContinuityReport,
}

impl GradcheckReport {
    pub fn max_error_no_contact(&self) -> f64 {
        self.no_contact.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    /// Largest error over entries whose probe keeps the contact sequence.
    pub fn max_error_contact(&self) -> f64 {
        self.contact
            .iter()
            .filter(|p| !p.branch_flip)
            .map(|p| p.rel_error)
            .fold(0.0, f64::max)
    }

    pub fn contact_entries_checked(&self) -> usize {
        self.contact.iter().filter(|p| !p.branch_flip).count()
    }
}
