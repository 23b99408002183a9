//! First-order descent on the control sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::objective::{objective_gradient, ObjectiveConfig};
use crate::sim::{ContactConfig, Scenario};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GradientDescent,
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    pub iterations: usize,
    /// Stop once the gradient max-norm drops below this.
    #[serde(default)]
    pub gradient_tolerance: Option<f64>,
    /// Keep a control snapshot every this many iterations (0 disables).
    #[serde(default)]
    pub snapshot_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::GradientDescent,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: 0.0,
            iterations: DEFAULT_ITERATIONS,
            gradient_tolerance: None,
            snapshot_every: 0,
        }
    }
}

pub const DEFAULT_LEARNING_RATE: f64 = 30.0;
pub const DEFAULT_ITERATIONS: usize = 2000;

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SimError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations < 1 {
            return Err(SimError::Config("iterations must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(SimError::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub grad_max_norm: f64,
    pub contacts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub controls: Vec<Vec2>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl LearningCurve {
    pub fn best(&self) -> Option<&IterationRecord> {
        self.records.iter().min_by(|a, b| a.loss.total_cmp(&b.loss))
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Lowest-loss iterate seen.
    pub controls: Vec<Vec2>,
    pub best_loss: f64,
    pub curve: LearningCurve,
}

/// Minimizes the objective from `initial` and returns the best iterate.
///
/// Each record holds the loss of the iterate *before* that iteration's
/// update; one extra evaluation scores the final iterate.
pub fn optimize(
    scenario: &Scenario,
    contact: &ContactConfig,
    objective: &ObjectiveConfig,
    config: &OptimizerConfig,
    initial: &[Vec2],
) -> Result<OptimizeResult> {
    scenario.validate()?;
    contact.validate()?;
    objective.validate()?;
    config.validate()?;

    let mut controls = initial.to_vec();
    let mut velocity = vec![Vec2::ZERO; controls.len()];
    let mut curve = LearningCurve::default();
    let mut best = (f64::INFINITY, controls.clone());

    for iteration in 0..=config.iterations {
        let eval = objective_gradient(scenario, contact, objective, &controls)?;
        if !eval.loss.is_finite() {
            return Err(SimError::NonFinite {
                iteration,
                quantity: "loss",
            });
        }
        let grad_max_norm = eval
            .gradient
            .iter()
            .map(|g| g.x.abs().max(g.y.abs()))
            .fold(0.0, f64::max);
        if !grad_max_norm.is_finite() {
            return Err(SimError::NonFinite {
                iteration,
                quantity: "gradient",
            });
        }
        curve.records.push(IterationRecord {
            iteration,
            loss: eval.loss,
            grad_max_norm,
            contacts: eval.rollout.events.len(),
        });
        if config.snapshot_every > 0 && iteration % config.snapshot_every == 0 {
            curve.snapshots.push(Snapshot {
                iteration,
                controls: controls.clone(),
            });
        }
        if eval.loss < best.0 {
            best = (eval.loss, controls.clone());
        }
        let converged = config.gradient_tolerance.is_some_and(|tol| grad_max_norm < tol);
        if iteration == config.iterations || converged {
            break;
        }
        let lr = config.learning_rate;
        match config.method {
            Method::GradientDescent => {
                for (u, g) in controls.iter_mut().zip(&eval.gradient) {
                    *u = *u - g.scale_by(lr);
                }
            }
            Method::Momentum => {
                for ((u, m), g) in controls.iter_mut().zip(velocity.iter_mut()).zip(&eval.gradient) {
                    *m = m.scale_by(config.momentum) + *g;
                    *u = *u - m.scale_by(lr);
                }
            }
        }
    }

    Ok(OptimizeResult {
        controls: best.1,
        best_loss: best.0,
        curve,
    })
}
