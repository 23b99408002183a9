use crate::adjoint::Scalar;
use crate::error::{Result, SimError};
use crate::vec2::Vec2;

use super::contact::{
    closing_rate, collision_state, compute_toi, detect_penetration, integrate_candidate, resolve_elastic, swept_toi,
    Penetration, Toi,
};
use super::{ContactConfig, ContactEvent, ContactModel, ContactPair, Scenario, State, ToiRule, Wall};

/// Next state plus any contacts resolved during the step.
#[derive(Debug, Clone)]
pub struct StepOutput<S> {
    pub state: State<S>,
    pub events: Vec<ContactEvent>,
}

/// Advances one step of length `scenario.dt()` under Ball 1 control `u1`.
///
/// `index` only labels emitted events and errors.
pub fn step<S: Scalar>(
    state: &State<S>,
    u1: Vec2<S>,
    scenario: &Scenario,
    contact: &ContactConfig,
    index: usize,
) -> Result<StepOutput<S>> {
    let out = match contact.model {
        ContactModel::Direct => direct_step(state, u1, scenario, contact, index),
        ContactModel::Compliant => compliant_step(state, u1, scenario, contact, index),
        ContactModel::Pbd => pbd_step(state, u1, scenario, contact, index),
    };
    out.map_err(|e| e.at_step(index))
}

struct Active<S> {
    pen: Penetration<S>,
    toi: Toi<S>,
}

fn direct_step<S: Scalar>(
    state: &State<S>,
    u1: Vec2<S>,
    scenario: &Scenario,
    contact: &ContactConfig,
    index: usize,
) -> Result<StepOutput<S>> {
    let dt = scenario.dt();
    let radius = scenario.radius;
    let wall = scenario.wall.as_ref();
    let p = state.positions();
    let v = state.velocities();
    let (v_hat, p_hat) = integrate_candidate(p, v, u1, dt);

    let mut active = Vec::new();
    for pen in detect_penetration(p_hat, radius, wall, contact.penetration_tolerance)? {
        let rate = closing_rate(pen.pair, v_hat, pen.normal);
        if rate.value() >= -contact.approach_tolerance {
            continue;
        }
        let toi = match (pen.pair, contact.toi_rule) {
            (ContactPair::BallBall, ToiRule::Swept) => swept_toi(pen.offset, v_hat[1] - v_hat[0], radius, dt)?,
            _ => compute_toi(pen.depth, rate, dt)?,
        };
        active.push(Active { pen, toi });
    }
    if active.is_empty() {
        return Ok(StepOutput {
            state: State::from_parts(p_hat, v_hat),
            events: Vec::new(),
        });
    }
    // earliest impact first: larger rewind means earlier instant
    active.sort_by(|a, b| {
        b.toi
            .value
            .value()
            .total_cmp(&a.toi.value.value())
            .then(a.pen.pair.cmp(&b.pen.pair))
    });

    let controls = [u1, Vec2::zero()];
    let mut velocities = v_hat;
    let mut first_toi: [Option<S>; 2] = [None, None];
    let mut events = Vec::with_capacity(active.len());
    for Active { pen, toi } in active {
        let (pre, normal) = if contact.toi_velocity {
            let rewound = collision_state(p, v, u1, v_hat, dt, toi.value, pen.pair, wall)?;
            // a body already hit this step keeps its resolved velocity, less
            // the control it would have received over the rewound span
            let mut pre = velocities;
            for &b in pen.pair.bodies() {
                pre[b] = if first_toi[b].is_some() {
                    velocities[b] - controls[b] * toi.value
                } else {
                    rewound.velocities[b]
                };
            }
            (pre, rewound.normal)
        } else {
            (velocities, pen.normal)
        };
        if closing_rate(pen.pair, pre, normal).value() >= -contact.approach_tolerance {
            continue;
        }
        let post = resolve_elastic(pre, normal, pen.pair);
        for &b in pen.pair.bodies() {
            velocities[b] = post[b];
            first_toi[b].get_or_insert(toi.value);
        }
        events.push(ContactEvent {
            step: index,
            pair: pen.pair,
            depth: pen.depth.value(),
            penetration_normal: pen.normal.value(),
            toi: toi.value.value(),
            toi_clamped: toi.clamped,
            normal: normal.value(),
            velocities_before: [pre[0].value(), pre[1].value()],
            velocities_after: [post[0].value(), post[1].value()],
            rewound_gap: rewound_gap(&p, &v_hat, dt, toi.value.value(), pen.pair, radius, wall),
        });
    }

    let mut positions = p_hat;
    for b in 0..2 {
        if let Some(toi) = first_toi[b] {
            positions[b] = if contact.toi_position {
                p[b] + v_hat[b] * (S::constant(dt) - toi) + velocities[b] * toi
            } else {
                p[b] + velocities[b].scale_by(dt)
            };
        }
    }
    Ok(StepOutput {
        state: State::from_parts(positions, velocities),
        events,
    })
}

fn rewound_gap<S: Scalar>(
    p: &[Vec2<S>; 2],
    v_hat: &[Vec2<S>; 2],
    dt: f64,
    toi: f64,
    pair: ContactPair,
    radius: f64,
    wall: Option<&Wall>,
) -> f64 {
    let at = |b: usize| p[b].value() + v_hat[b].value().scale_by(dt - toi);
    match (pair, wall) {
        (ContactPair::BallBall, _) => (at(1) - at(0)).length() - 2.0 * radius,
        (ContactPair::Ball1Wall, Some(w)) => w.level - at(0).y - radius,
        (ContactPair::Ball2Wall, Some(w)) => w.level - at(1).y - radius,
        _ => f64::NAN,
    }
}

fn penalty_event<S: Scalar>(pen: &Penetration<S>, index: usize, v: [Vec2<S>; 2], after: [Vec2<S>; 2]) -> ContactEvent {
    ContactEvent {
        step: index,
        pair: pen.pair,
        depth: pen.depth.value(),
        penetration_normal: pen.normal.value(),
        toi: 0.0,
        toi_clamped: false,
        normal: pen.normal.value(),
        velocities_before: [v[0].value(), v[1].value()],
        velocities_after: [after[0].value(), after[1].value()],
        rewound_gap: pen.depth.value(),
    }
}

fn compliant_step<S: Scalar>(
    state: &State<S>,
    u1: Vec2<S>,
    scenario: &Scenario,
    contact: &ContactConfig,
    index: usize,
) -> Result<StepOutput<S>> {
    let dt = scenario.dt();
    let p = state.positions();
    let v = state.velocities();
    let mut force = [u1, Vec2::zero()];
    let pens: Vec<_> = detect_penetration(p, scenario.radius, scenario.wall.as_ref(), 0.0)?
        .into_iter()
        .filter(|pen| pen.depth.value() < 0.0)
        .collect();
    for pen in &pens {
        let rate = closing_rate(pen.pair, v, pen.normal);
        let magnitude = -pen.depth.scale(contact.stiffness) - rate.scale(contact.damping);
        let push = pen.normal * magnitude;
        match pen.pair {
            ContactPair::BallBall => {
                force[0] = force[0] - push;
                force[1] = force[1] + push;
            }
            ContactPair::Ball1Wall => force[0] = force[0] + push,
            ContactPair::Ball2Wall => force[1] = force[1] + push,
        }
    }
    let velocities = [v[0] + force[0].scale_by(dt), v[1] + force[1].scale_by(dt)];
    let positions = [p[0] + velocities[0].scale_by(dt), p[1] + velocities[1].scale_by(dt)];
    let events = pens
        .iter()
        .map(|pen| penalty_event(pen, index, v, velocities))
        .collect();
    Ok(StepOutput {
        state: State::from_parts(positions, velocities),
        events,
    })
}

fn pbd_step<S: Scalar>(
    state: &State<S>,
    u1: Vec2<S>,
    scenario: &Scenario,
    _contact: &ContactConfig,
    index: usize,
) -> Result<StepOutput<S>> {
    let dt = scenario.dt();
    let radius = scenario.radius;
    let wall = scenario.wall.as_ref();
    let p = state.positions();
    let v = state.velocities();
    let (v_hat, p_hat) = integrate_candidate(p, v, u1, dt);
    let mut positions = p_hat;
    let mut events = Vec::new();
    for pair in [ContactPair::BallBall, ContactPair::Ball1Wall, ContactPair::Ball2Wall] {
        // re-detect on the already projected positions
        let Some(pen) = detect_penetration(positions, radius, wall, 0.0)?
            .into_iter()
            .find(|pen| pen.pair == pair && pen.depth.value() < 0.0)
        else {
            continue;
        };
        match pair {
            ContactPair::BallBall => {
                let half = pen.normal * pen.depth.scale(0.5);
                positions[0] = positions[0] + half;
                positions[1] = positions[1] - half;
            }
            ContactPair::Ball1Wall => positions[0] = positions[0] - pen.normal * pen.depth,
            ContactPair::Ball2Wall => positions[1] = positions[1] - pen.normal * pen.depth,
        }
        events.push(penalty_event(&pen, index, v_hat, v_hat));
    }
    let inv_dt = 1.0 / dt;
    let velocities = [
        (positions[0] - p[0]).scale_by(inv_dt),
        (positions[1] - p[1]).scale_by(inv_dt),
    ];
    for e in &mut events {
        e.velocities_after = [velocities[0].value(), velocities[1].value()];
    }
    Ok(StepOutput {
        state: State::from_parts(positions, velocities),
        events,
    })
}

/// Full trajectory of `N + 1` states plus every contact event.
#[derive(Debug, Clone)]
pub struct Rollout<S = f64> {
    pub states: Vec<State<S>>,
    pub events: Vec<ContactEvent>,
}

impl<S: Scalar> Rollout<S> {
    pub fn final_state(&self) -> &State<S> {
        self.states.last().expect("rollout always holds the initial state")
    }
}

/// Simulates `controls.len()` steps from the scenario's initial state.
pub fn rollout<S: Scalar>(scenario: &Scenario, contact: &ContactConfig, controls: &[Vec2<S>]) -> Result<Rollout<S>> {
    if controls.len() != scenario.steps {
        return Err(SimError::Config(format!(
            "expected {} controls, got {}",
            scenario.steps,
            controls.len()
        )));
    }
    let mut states = Vec::with_capacity(controls.len() + 1);
    let mut events = Vec::new();
    let mut current = State::lift(&scenario.initial);
    states.push(current);
    for (i, &u) in controls.iter().enumerate() {
        let out = step(&current, u, scenario, contact, i)?;
        current = out.state;
        states.push(current);
        events.extend(out.events);
    }
    Ok(Rollout { states, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(dt: f64) -> Scenario {
        Scenario {
            name: "toy".into(),
            radius: 0.2,
            initial: State {
                p1: Vec2::new(0.0, 0.0),
                p2: Vec2::new(0.5, 0.0),
                v1: Vec2::new(1.0, 0.0),
                v2: Vec2::ZERO,
            },
            wall: None,
            horizon: dt,
            steps: 1,
            epsilon: 0.0,
            initial_control: Vec2::ZERO,
            target: Vec2::ZERO,
        }
    }

    #[test]
    fn no_contact_step_is_candidate() {
        let s = Scenario::single();
        let st = s.initial;
        let u = Vec2::new(0.4, 3.0);
        let out = step(&st, u, &s, &ContactConfig::default(), 0).unwrap();
        let (vh, ph) = integrate_candidate(st.positions(), st.velocities(), u, s.dt());
        assert_eq!(out.state, State::from_parts(ph, vh));
        assert!(out.events.is_empty());
    }

    #[test]
    fn both_corrections_head_on() {
        let s = toy(0.2);
        let out = step(&s.initial, Vec2::ZERO, &s, &ContactConfig::direct(true, true), 0).unwrap();
        let st = out.state;
        assert_relative_eq!(st.v1.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(st.v2.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(st.p1.x, 0.1, epsilon = 1e-12);
        assert_relative_eq!(st.p2.x, 0.6, epsilon = 1e-12);
        assert_eq!(out.events.len(), 1);
        assert_relative_eq!(out.events[0].toi, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn no_corrections_head_on() {
        let s = toy(0.2);
        let out = step(&s.initial, Vec2::ZERO, &s, &ContactConfig::direct(false, false), 0).unwrap();
        let st = out.state;
        assert_eq!(st.v1, Vec2::ZERO);
        assert_eq!(st.v2, Vec2::new(1.0, 0.0));
        assert_eq!(st.p1, Vec2::ZERO);
        assert_relative_eq!(st.p2.x, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn velocity_flag_is_inert_when_touching_at_step_end() {
        // contact exactly at the end of the step => zero rewind
        let s = toy(0.1);
        let mut outs = Vec::new();
        for (tp, tv) in [(false, false), (true, false), (false, true), (true, true)] {
            let out = step(&s.initial, Vec2::ZERO, &s, &ContactConfig::direct(tp, tv), 0).unwrap();
            assert_eq!(out.events.len(), 1);
            assert_eq!(out.events[0].toi, 0.0);
            outs.push(out.state);
        }
        assert!(outs.iter().all(|st| st.v1 == outs[0].v1 && st.v2 == outs[0].v2));
        assert_eq!(outs[0], outs[2]);
        assert_eq!(outs[1], outs[3]);
        // the position replay keeps the candidate positions at zero rewind
        let (_, p_hat) = integrate_candidate(s.initial.positions(), s.initial.velocities(), Vec2::ZERO, 0.1);
        assert_eq!([outs[3].p1, outs[3].p2], p_hat);
    }

    #[test]
    fn separating_pair_is_not_resolved() {
        let mut s = toy(0.1);
        s.initial.p2 = Vec2::new(0.35, 0.0);
        s.initial.v1 = Vec2::new(-1.0, 0.0);
        let out = step(&s.initial, Vec2::ZERO, &s, &ContactConfig::default(), 0).unwrap();
        assert!(out.events.is_empty());
        assert_eq!(out.state.v1, Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn wall_bounce_keeps_speed() {
        let mut s = toy(0.5);
        s.initial = State {
            p1: Vec2::new(0.0, 0.7),
            p2: Vec2::new(3.0, -3.0),
            v1: Vec2::new(0.3, 1.0),
            v2: Vec2::ZERO,
        };
        s.wall = Some(Wall { level: 1.0 });
        let out = step(&s.initial, Vec2::ZERO, &s, &ContactConfig::direct(true, true), 0).unwrap();
        assert_eq!(out.events.len(), 1);
        assert_eq!(out.events[0].pair, ContactPair::Ball1Wall);
        assert_relative_eq!(out.state.v1.y, -1.0, epsilon = 1e-15);
        assert_relative_eq!(out.state.v1.length(), s.initial.v1.length(), max_relative = 1e-12);
        // rewound to y = 0.8, then 0.4 s downward
        assert_relative_eq!(out.state.p1.y, 0.8 - 0.4, epsilon = 1e-12);
    }

    #[test]
    fn rollout_zero_control_is_static() {
        let s = Scenario::single();
        let controls = vec![Vec2::ZERO; s.steps];
        let r = rollout(&s, &ContactConfig::default(), &controls).unwrap();
        assert_eq!(r.states.len(), s.steps + 1);
        assert!(r.states.iter().all(|st| *st == s.initial));
        assert!(r.events.is_empty());
    }

    #[test]
    fn rollout_rejects_wrong_length() {
        let s = Scenario::single();
        let err = rollout(&s, &ContactConfig::default(), &[Vec2::ZERO; 3]).unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn degeneracy_carries_step_index() {
        let mut s = toy(0.1);
        s.steps = 3;
        s.horizon = 0.3;
        // Ball 1 driven exactly onto Ball 2's center
        s.initial.p2 = Vec2::new(0.45, 0.0);
        s.initial.v1 = Vec2::new(4.5, 0.0);
        let err = rollout(&s, &ContactConfig::default(), &[Vec2::ZERO; 3]).unwrap_err();
        assert!(matches!(err, SimError::Degenerate { step: Some(0), .. }), "{err:?}");
    }

    #[test]
    fn single_scenario_has_one_collision() {
        let s = Scenario::single();
        let r = rollout(&s, &ContactConfig::default(), &s.initial_controls()).unwrap();
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].pair, ContactPair::BallBall);
    }

    #[test]
    fn multi_scenario_event_sequence() {
        let s = Scenario::multi();
        for contact in [ContactConfig::direct(true, true), ContactConfig::direct(false, false)] {
            let r = rollout(&s, &contact, &s.initial_controls()).unwrap();
            let pairs: Vec<_> = r.events.iter().map(|e| e.pair).collect();
            // Ball 2 is knocked into the wall and rebounds onto Ball 1
            assert_eq!(
                pairs,
                [ContactPair::BallBall, ContactPair::Ball2Wall, ContactPair::BallBall],
                "{contact:?}"
            );
        }
    }

    #[test]
    fn rollout_is_deterministic() {
        let s = Scenario::multi();
        let a = rollout(&s, &ContactConfig::default(), &s.initial_controls()).unwrap();
        let b = rollout(&s, &ContactConfig::default(), &s.initial_controls()).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in [(x.p1, y.p1), (x.p2, y.p2), (x.v1, y.v1), (x.v2, y.v2)] {
                assert_eq!(p.x.to_bits(), q.x.to_bits());
                assert_eq!(p.y.to_bits(), q.y.to_bits());
            }
        }
    }

    #[test]
    fn baselines_rejects_toi_flags() {
        let mut c = ContactConfig::pbd();
        c.toi_velocity = true;
        assert!(c.validate().is_err());
        assert!(ContactConfig::compliant(-1.0, 0.0).validate().is_err());
        assert!(ContactConfig::compliant(1e4, 0.0).validate().is_ok());
    }

    #[test]
    fn compliant_transfers_momentum() {
        let s = Scenario::single();
        let contact = ContactConfig {
            model: ContactModel::Compliant,
            ..ContactConfig::pbd()
        };
        for s in [s, Scenario::multi()] {
            let r = rollout(&s, &contact, &s.initial_controls()).unwrap();
            let end = r.final_state();
            assert!(end.v2.length() > 0.5, "{end:?}");
            // default stiffness keeps overlap under 5% of the radius
            let max_pen = r.events.iter().map(|e| -e.depth).fold(0.0, f64::max);
            assert!(max_pen > 0.0 && max_pen < 0.05 * s.radius, "max penetration {max_pen}");
        }
    }

    #[test]
    fn pbd_separates_balls() {
        let s = Scenario::single();
        let r = rollout(&s, &ContactConfig::pbd(), &s.initial_controls()).unwrap();
        assert!(!r.events.is_empty());
        assert!(r.final_state().v2.y > 0.0);
        for st in &r.states {
            assert!((st.p2 - st.p1).length() >= 0.4 - 1e-9);
        }
    }
}
