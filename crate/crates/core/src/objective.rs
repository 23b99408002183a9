//! Discrete optimal-control objective and its adjoint gradient.
//!
//! `J(u) = |p2(T) - target|^2 + sum_i eps |u_i|^2 dt`, with the running cost
//! evaluated at the left endpoint of each step.

use serde::{Deserialize, Serialize};

use crate::adjoint::{Scalar, Tape};
use crate::error::{Result, SimError};
use crate::sim::{rollout, ContactConfig, Rollout, Scenario, State};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub epsilon: f64,
    pub target: Vec2,
}

impl ObjectiveConfig {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self {
            epsilon: scenario.epsilon,
            target: scenario.target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SimError::Config(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Squared distance of Ball 2 from the target.
pub fn terminal_cost<S: Scalar>(state: &State<S>, target: Vec2) -> S {
    (state.p2 - Vec2::lift(target)).norm_squared()
}

pub fn running_cost<S: Scalar>(u1: Vec2<S>, epsilon: f64) -> S {
    u1.norm_squared().scale(epsilon)
}

/// Objective value of an existing rollout.
pub fn accumulate<S: Scalar>(traj: &Rollout<S>, controls: &[Vec2<S>], objective: &ObjectiveConfig, dt: f64) -> S {
    let running = controls.iter().fold(S::constant(0.0), |acc, &u| {
        acc + running_cost(u, objective.epsilon).scale(dt)
    });
    terminal_cost(traj.final_state(), objective.target) + running
}

/// Plain-value objective.
pub fn objective(scenario: &Scenario, contact: &ContactConfig, controls: &[Vec2]) -> Result<f64> {
    let traj = rollout(scenario, contact, controls)?;
    let obj = ObjectiveConfig::from_scenario(scenario);
    Ok(accumulate(&traj, controls, &obj, scenario.dt()))
}

/// Loss, gradient with respect to every control entry, and the rollout's
/// contact events.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: Vec<Vec2>,
    pub rollout: Rollout<f64>,
}

/// Objective and its adjoint gradient from a single recorded rollout.
pub fn objective_gradient(
    scenario: &Scenario,
    contact: &ContactConfig,
    objective: &ObjectiveConfig,
    controls: &[Vec2],
) -> Result<Evaluation> {
    let tape = Tape::with_capacity(controls.len() * 64);
    let lifted: Vec<Vec2<_>> = controls
        .iter()
        .map(|u| Vec2::new(tape.lift(u.x), tape.lift(u.y)))
        .collect();
    let traj = rollout(scenario, contact, &lifted)?;
    let loss = accumulate(&traj, &lifted, objective, scenario.dt());
    let grads = tape.backward(loss).expect("loss recorded on this tape");
    let gradient = lifted
        .iter()
        .map(|u| Vec2::new(grads.wrt(u.x), grads.wrt(u.y)))
        .collect();
    Ok(Evaluation {
        loss: loss.value(),
        gradient,
        rollout: Rollout {
            states: traj.states.iter().map(State::value).collect(),
            events: traj.events,
        },
    })
}
