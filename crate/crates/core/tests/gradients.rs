use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use toi_sim::adjoint::{Scalar, Tape};
use toi_sim::experiment::{
    central_difference, check_gradient, perturbed_controls, relative_error, sample_entries, Axis, FD_STEP,
};
use toi_sim::objective::{accumulate, running_cost, terminal_cost, ObjectiveConfig};
use toi_sim::sim::{rollout, ContactConfig, ContactModel, Scenario, ToiRule};
use toi_sim::Vec2;

fn contact_controls(scenario: &Scenario, seed: u64) -> Vec<Vec2> {
    perturbed_controls(scenario, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `3 p1.x - p1.y` at the end of the rollout: exercises Ball 1's adjoint path,
/// which the Ball 2 objective only sees through the contacts.
fn ball1_functional<S: Scalar>(scenario: &Scenario, contact: &ContactConfig, controls: &[Vec2<S>]) -> S {
    let end = *rollout(scenario, contact, controls).unwrap().final_state();
    end.p1.x.scale(3.0) - end.p1.y
}

#[test]
fn ball1_terminal_position_matches_finite_differences() {
    for scenario in [Scenario::single(), Scenario::multi()] {
        let contact = ContactConfig::default();
        let controls = contact_controls(&scenario, 11);
        let tape = Tape::new();
        let lifted: Vec<_> = controls
            .iter()
            .map(|u| Vec2::new(tape.lift(u.x), tape.lift(u.y)))
            .collect();
        let f = ball1_functional(&scenario, &contact, &lifted);
        let grads = tape.backward(f).unwrap();

        let h = FD_STEP;
        for step in [0, 100, 250, 300, 400, 479] {
            let mut plus = controls.clone();
            plus[step].x += h;
            let mut minus = controls.clone();
            minus[step].x -= h;
            let fd = (ball1_functional(&scenario, &contact, &plus) - ball1_functional(&scenario, &contact, &minus))
                / (2.0 * h);
            let ad = grads.wrt(lifted[step].x);
            assert!(
                relative_error(ad, fd) < 1e-5 || (ad - fd).abs() < 1e-9,
                "{} step {step}: adjoint {ad} vs fd {fd}",
                scenario.name
            );
        }
    }
}

/// The adjoint is the exact derivative of the discrete map under every
/// contact configuration; only its usefulness differs.
#[test]
fn every_configuration_matches_finite_differences_off_branch_flips() {
    let mut configs = vec![
        ContactConfig::direct(false, false),
        ContactConfig::direct(true, false),
        ContactConfig::direct(false, true),
        ContactConfig::direct(true, true),
        ContactConfig {
            toi_rule: ToiRule::Linear,
            ..ContactConfig::direct(true, true)
        },
        ContactConfig::pbd(),
    ];
    configs.push(ContactConfig {
        model: ContactModel::Compliant,
        ..ContactConfig::pbd()
    });
    for scenario in [Scenario::single(), Scenario::multi()] {
        let objective = ObjectiveConfig::from_scenario(&scenario);
        let controls = contact_controls(&scenario, 5);
        let entries = sample_entries(scenario.steps, 20, &mut ChaCha8Rng::seed_from_u64(9));
        for contact in &configs {
            // pbd's v = dp / dt and the stiff penalty amplify roundoff, so the
            // baselines get a coarser difference step
            let h = if contact.model == ContactModel::Direct {
                FD_STEP
            } else {
                1e-4
            };
            let probes = check_gradient(&scenario, contact, &objective, &controls, &entries, h).unwrap();
            let kept: Vec<_> = probes.iter().filter(|p| !p.branch_flip).collect();
            assert!(kept.len() >= 15, "{contact:?}");
            for p in kept {
                // ~1e-13 cancellation noise in the O(1) loss becomes ~1e-8 after
                // dividing by 2h; tiny entries are judged by that floor
                let abs = (p.adjoint - p.finite_difference).abs();
                assert!(
                    p.rel_error < 1e-4 || abs < 1e-8,
                    "{} {:?}: step {} {:?} adjoint {} fd {}",
                    scenario.name,
                    contact.model,
                    p.step,
                    p.axis,
                    p.adjoint,
                    p.finite_difference
                );
            }
        }
    }
}

#[test]
fn gradient_is_zero_after_the_last_contact_for_ball2_cost_only() {
    // with epsilon = 0, controls after Ball 1's last contact cannot affect Ball 2
    let mut scenario = Scenario::single();
    scenario.epsilon = 0.0;
    let objective = ObjectiveConfig::from_scenario(&scenario);
    let controls = scenario.initial_controls();
    let last = rollout(&scenario, &ContactConfig::default(), &controls)
        .unwrap()
        .events
        .last()
        .unwrap()
        .step;
    let eval =
        toi_sim::objective::objective_gradient(&scenario, &ContactConfig::default(), &objective, &controls).unwrap();
    for g in &eval.gradient[last + 1..] {
        assert_eq!(*g, Vec2::ZERO);
    }
    assert!(eval.gradient[..=last].iter().any(|g| g.length() > 0.0));
}

#[test]
fn branch_flip_is_detected_at_the_contact_shift() {
    use toi_sim::experiment::locate_contact_shift;
    let scenario = Scenario::single();
    let contact = ContactConfig::default();
    let alpha = locate_contact_shift(&scenario, &contact, 0.5).unwrap();
    let controls = vec![scenario.initial_control + Vec2::new(0.5, alpha); scenario.steps];
    let objective = ObjectiveConfig::from_scenario(&scenario);
    let (_, flip) = central_difference(&scenario, &contact, &objective, &controls, 0, Axis::Y, 1e-4).unwrap();
    assert!(flip);
}

fn loss_parts<S: Scalar>(scenario: &Scenario, contact: &ContactConfig, controls: &[Vec2<S>]) -> (S, S) {
    let traj = rollout(scenario, contact, controls).unwrap();
    let dt = scenario.dt();
    let running = controls.iter().fold(S::constant(0.0), |acc, &u| {
        acc + running_cost(u, scenario.epsilon).scale(dt)
    });
    (terminal_cost(traj.final_state(), scenario.target), running)
}

/// Deterministic mini-polynomial in two variables touching every tape op.
fn poly<S: Scalar>(x: S, y: S, c: &[f64; 6]) -> S {
    let r = (x.square() + y.square() + S::constant(1.0)).try_sqrt().unwrap();
    let q = (x * y).try_div(r).unwrap();
    x.scale(c[0]) + y.scale(c[1]) + (x * y).scale(c[2]) + x.square().scale(c[3]) + q.scale(c[4]) - r.scale(c[5])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_matches_fd_on_random_expressions(
        x in -3.0..3.0f64,
        y in -3.0..3.0f64,
        c in prop::array::uniform6(-2.0..2.0f64),
    ) {
        let tape = Tape::new();
        let (vx, vy) = (tape.lift(x), tape.lift(y));
        let out = poly(vx, vy, &c);
        prop_assert!((out.value() - poly(x, y, &c)).abs() < 1e-12);
        let g = tape.backward(out).unwrap();
        let h = 1e-6;
        let fx = (poly(x + h, y, &c) - poly(x - h, y, &c)) / (2.0 * h);
        let fy = (poly(x, y + h, &c) - poly(x, y - h, &c)) / (2.0 * h);
        prop_assert!((g.wrt(vx) - fx).abs() < 1e-6 * (1.0 + fx.abs()));
        prop_assert!((g.wrt(vy) - fy).abs() < 1e-6 * (1.0 + fy.abs()));
    }

    #[test]
    fn adjoint_is_linear_in_the_output(a in -5.0..5.0f64, b in -5.0..5.0f64, seed in 0u64..1000) {
        let scenario = Scenario::single();
        let contact = ContactConfig::default();
        let controls = contact_controls(&scenario, seed);

        // gradient of ca * terminal + cb * running
        let grad_of = |ca: f64, cb: f64| {
            let tape = Tape::new();
            let lifted: Vec<_> = controls.iter().map(|u| Vec2::new(tape.lift(u.x), tape.lift(u.y))).collect();
            let (t, r) = loss_parts(&scenario, &contact, &lifted);
            let g = tape.backward(t.scale(ca) + r.scale(cb)).unwrap();
            lifted.iter().map(|u| Vec2::new(g.wrt(u.x), g.wrt(u.y))).collect::<Vec<_>>()
        };
        let gt = grad_of(1.0, 0.0);
        let gr = grad_of(0.0, 1.0);
        let gc = grad_of(a, b);
        for i in 0..controls.len() {
            let expect = gt[i].scale_by(a) + gr[i].scale_by(b);
            prop_assert!((gc[i] - expect).length() <= 1e-12 * (1.0 + expect.length()));
        }
    }
}

#[test]
fn objective_splits_into_terminal_and_running_parts() {
    let scenario = Scenario::multi();
    let contact = ContactConfig::default();
    let controls = contact_controls(&scenario, 2);
    let (t, r) = loss_parts(&scenario, &contact, &controls);
    let traj = rollout(&scenario, &contact, &controls).unwrap();
    let total = accumulate(
        &traj,
        &controls,
        &ObjectiveConfig::from_scenario(&scenario),
        scenario.dt(),
    );
    assert!((t + r - total).abs() < 1e-14);
}
