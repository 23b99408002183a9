//! Two-ball planar dynamics with frictionless elastic contacts.
//!
//! Ball 1 is driven by a per-step force; Ball 2 is unforced. Both balls
//! have unit mass and equal radius. An optional horizontal wall bounds the
//! plane from above.

mod contact;
mod step;

pub use contact::{
    closing_rate, collision_state, compute_toi, detect_penetration, integrate_candidate, resolve_elastic, swept_toi,
    CollisionState, Penetration, Toi,
};
pub use step::{rollout, step, Rollout, StepOutput};

use serde::{Deserialize, Serialize};

use crate::adjoint::Scalar;
use crate::error::{Result, SimError};
use crate::vec2::Vec2;

/// Positions and velocities of both balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "Vec2<S>: Serialize", deserialize = "Vec2<S>: Deserialize<'de>"))]
pub struct State<S = f64> {
    pub p1: Vec2<S>,
    pub p2: Vec2<S>,
    pub v1: Vec2<S>,
    pub v2: Vec2<S>,
}

impl<S: Scalar> State<S> {
    pub fn lift(state: &State<f64>) -> Self {
        Self {
            p1: Vec2::lift(state.p1),
            p2: Vec2::lift(state.p2),
            v1: Vec2::lift(state.v1),
            v2: Vec2::lift(state.v2),
        }
    }

    pub fn value(&self) -> State<f64> {
        State {
            p1: self.p1.value(),
            p2: self.p2.value(),
            v1: self.v1.value(),
            v2: self.v2.value(),
        }
    }

    pub(crate) fn positions(&self) -> [Vec2<S>; 2] {
        [self.p1, self.p2]
    }

    pub(crate) fn velocities(&self) -> [Vec2<S>; 2] {
        [self.v1, self.v2]
    }

    pub(crate) fn from_parts(p: [Vec2<S>; 2], v: [Vec2<S>; 2]) -> Self {
        Self {
            p1: p[0],
            p2: p[1],
            v1: v[0],
            v2: v[1],
        }
    }
}

impl State<f64> {
    pub fn at_rest(p1: Vec2, p2: Vec2) -> Self {
        Self {
            p1,
            p2,
            v1: Vec2::ZERO,
            v2: Vec2::ZERO,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite() && self.v1.is_finite() && self.v2.is_finite()
    }

    pub fn momentum(&self) -> Vec2 {
        self.v1 + self.v2
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * (self.v1.norm_squared() + self.v2.norm_squared())
    }
}

/// Infinite horizontal wall at `y = level`; balls live below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub level: f64,
}

impl Wall {
    /// Unit normal pointing from the wall into the interior.
    pub fn normal<S: Scalar>(&self) -> Vec2<S> {
        Vec2::constant(0.0, -1.0)
    }
}

/// Static description of an optimal-control scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub radius: f64,
    pub initial: State,
    #[serde(default)]
    pub wall: Option<Wall>,
    pub horizon: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub initial_control: Vec2,
    /// Terminal-cost target for Ball 2.
    #[serde(default = "origin")]
    pub target: Vec2,
}

fn origin() -> Vec2 {
    Vec2::ZERO
}

impl Scenario {
    /// Single ball-ball collision: Ball 1 pushed up into Ball 2.
    pub fn single() -> Self {
        Self {
            name: "single".into(),
            radius: 0.2,
            initial: State::at_rest(Vec2::new(-1.0, -2.0), Vec2::new(-1.0, -1.0)),
            wall: None,
            horizon: 1.0,
            steps: 480,
            epsilon: 0.01,
            initial_control: Vec2::new(0.0, 3.0),
            target: Vec2::ZERO,
        }
    }

    /// Two ball-ball collisions and one wall bounce under the initial control.
    pub fn multi() -> Self {
        Self {
            name: "multi".into(),
            radius: 0.2,
            initial: State::at_rest(Vec2::new(0.25, -0.3), Vec2::new(-0.5, 0.6)),
            wall: Some(Wall { level: 1.0 }),
            horizon: 1.0,
            steps: 480,
            epsilon: 0.01,
            initial_control: Vec2::new(-3.5, 3.0),
            target: Vec2::ZERO,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "single" => Some(Self::single()),
            "multi" => Some(Self::multi()),
            _ => None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Constant initial control sequence of length `steps`.
    pub fn initial_controls(&self) -> Vec<Vec2> {
        vec![self.initial_control; self.steps]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::Config(msg));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return fail(format!("radius must be positive, got {}", self.radius));
        }
        if self.steps < 1 {
            return fail("steps must be at least 1".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if !self.initial.is_finite() || !self.initial_control.is_finite() || !self.target.is_finite() {
            return fail("initial state, control and target must be finite".into());
        }
        if (self.initial.p2 - self.initial.p1).length() < 2.0 * self.radius {
            return fail("initial balls overlap".into());
        }
        if let Some(wall) = self.wall {
            if !wall.level.is_finite() {
                return fail("wall level must be finite".into());
            }
            for p in [self.initial.p1, self.initial.p2] {
                if p.y + self.radius > wall.level {
                    return fail("initial ball crosses the wall".into());
                }
            }
        }
        Ok(())
    }
}

/// How contacts are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactModel {
    /// Instantaneous velocity impulse computed in closed form.
    Direct,
    /// Penalty spring-damper acting over several steps.
    Compliant,
    /// Position projection followed by a finite-difference velocity update.
    Pbd,
}

impl std::str::FromStr for ContactModel {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "compliant" => Ok(Self::Compliant),
            "pbd" => Ok(Self::Pbd),
            other => Err(SimError::Config(format!("unknown contact model `{other}`"))),
        }
    }
}

impl std::fmt::Display for ContactModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Compliant => "compliant",
            Self::Pbd => "pbd",
        })
    }
}

/// How the time of impact is estimated from a penetrated candidate state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToiRule {
    /// Depth over normal closing rate.
    Linear,
    /// Root of the swept-circle distance equation; exact for straight-line motion.
    Swept,
}

/// Contact model selection and the two time-of-impact corrections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactConfig {
    pub model: ContactModel,
    /// Replay position across the impact instant.
    #[serde(default)]
    pub toi_position: bool,
    /// Resolve the impulse from the rewound velocity and contact normal.
    #[serde(default)]
    pub toi_velocity: bool,
    #[serde(default = "default_toi_rule")]
    pub toi_rule: ToiRule,
    /// Penalty stiffness (compliant model only).
    #[serde(default = "default_stiffness")]
    pub stiffness: f64,
    #[serde(default)]
    pub damping: f64,
    /// Slack on the penetration test so `d = 0` counts as contact.
    #[serde(default = "default_tolerance")]
    pub penetration_tolerance: f64,
    /// Minimum closing speed for an impulse to be applied.
    #[serde(default = "default_approach")]
    pub approach_tolerance: f64,
}

fn default_toi_rule() -> ToiRule {
    ToiRule::Swept
}
fn default_stiffness() -> f64 {
    1e5
}
fn default_tolerance() -> f64 {
    1e-12
}
fn default_approach() -> f64 {
    1e-9
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self::direct(true, true)
    }
}

impl ContactConfig {
    pub fn direct(toi_position: bool, toi_velocity: bool) -> Self {
        Self {
            model: ContactModel::Direct,
            toi_position,
            toi_velocity,
            toi_rule: default_toi_rule(),
            stiffness: default_stiffness(),
            damping: 0.0,
            penetration_tolerance: default_tolerance(),
            approach_tolerance: default_approach(),
        }
    }

    pub fn compliant(stiffness: f64, damping: f64) -> Self {
        Self {
            model: ContactModel::Compliant,
            stiffness,
            damping,
            ..Self::direct(false, false)
        }
    }

    pub fn pbd() -> Self {
        Self {
            model: ContactModel::Pbd,
            ..Self::direct(false, false)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model != ContactModel::Direct && (self.toi_position || self.toi_velocity) {
            return Err(SimError::Config(format!(
                "time-of-impact corrections require the direct model, got `{}`",
                self.model
            )));
        }
        if self.model == ContactModel::Compliant {
            if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
                return Err(SimError::Config("stiffness must be positive".into()));
            }
            if !(self.damping >= 0.0 && self.damping.is_finite()) {
                return Err(SimError::Config("damping must be non-negative".into()));
            }
        }
        if !(self.penetration_tolerance >= 0.0 && self.approach_tolerance >= 0.0) {
            return Err(SimError::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Which bodies take part in a contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactPair {
    BallBall,
    Ball1Wall,
    Ball2Wall,
}

impl ContactPair {
    pub fn label(self) -> &'static str {
        match self {
            Self::BallBall => "ball-ball",
            Self::Ball1Wall => "ball1-wall",
            Self::Ball2Wall => "ball2-wall",
        }
    }

    /// Ball indices touched by this contact.
    pub(crate) fn bodies(self) -> &'static [usize] {
        match self {
            Self::BallBall => &[0, 1],
            Self::Ball1Wall => &[0],
            Self::Ball2Wall => &[1],
        }
    }
}

impl std::fmt::Display for ContactPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Record of one resolved (or, for penalty models, active) contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub step: usize,
    pub pair: ContactPair,
    /// Signed depth at the candidate positions; negative when penetrating.
    pub depth: f64,
    pub penetration_normal: Vec2,
    /// Time remaining in the step after the impact instant.
    pub toi: f64,
    pub toi_clamped: bool,
    /// Normal used for the impulse (rewound when the velocity correction is on).
    pub normal: Vec2,
    pub velocities_before: [Vec2; 2],
    pub velocities_after: [Vec2; 2],
    /// Signed gap between the surfaces at the rewound instant.
    pub rewound_gap: f64,
}

impl ContactEvent {
    /// Instant of impact measured from the start of the rollout.
    pub fn time(&self, dt: f64) -> f64 {
        (self.step as f64 + 1.0) * dt - self.toi
    }
}
