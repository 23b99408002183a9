//! The four CLI subcommands as library calls. Passing `out = None` skips all
//! file output.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::continuity::continuity_sweep;
use super::gradcheck::{
    check_gradient, no_contact_controls, perturbed_controls, sample_entries, FdProbe, GradcheckReport, FD_STEP,
};
use super::output::{
    ensure_dir, write_controls, write_curve, write_events, write_trajectory, RunMetadata, Table, ABLATION, CONTINUITY,
    GRADCHECK,
};
use super::{ExperimentSpec, Result};
use crate::objective::accumulate;
use crate::optimize::{optimize, OptimizeResult};
use crate::sim::{rollout, ContactConfig, ContactModel, Rollout};
use crate::vec2::Vec2;

/// Entries sampled per gradient-check case.
const GRADCHECK_ENTRIES: usize = 24;
/// Half-width of the noise added to the initial control in the contact case.
const CONTACT_NOISE: f64 = 0.5;
/// Lateral offset of the continuity family.
const SWEEP_LATERAL: f64 = 0.5;
const SWEEP_SPACINGS: [f64; 2] = [1e-4, 1e-5];
const SWEEP_HALF_POINTS: usize = 50;

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub rollout: Rollout,
    pub loss: f64,
}

/// Rolls out `controls` (or the scenario's constant initial control).
pub fn run_simulate(spec: &ExperimentSpec, controls: Option<&[Vec2]>, out: Option<&Path>) -> Result<SimulateReport> {
    let start = Instant::now();
    spec.validate()?;
    let scenario = &spec.scenario;
    let controls = controls.map_or_else(|| scenario.initial_controls(), <[Vec2]>::to_vec);
    let traj = rollout(scenario, &spec.contact, &controls)?;
    let loss = accumulate(&traj, &controls, &spec.objective(), scenario.dt());
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let dt = scenario.dt();
        write_trajectory(dir, &traj.states, &traj.events, dt)?;
        write_events(dir, &traj.events, dt)?;
        write_controls(dir, &controls, dt)?;
        let summary = json!({ "loss": loss, "events": traj.events.len() });
        RunMetadata::new("simulate", spec, start.elapsed().as_secs_f64(), summary).write(dir)?;
    }
    Ok(SimulateReport { rollout: traj, loss })
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub result: OptimizeResult,
    /// Loss of the last iterate, which may be worse than the best.
    pub final_iterate_loss: f64,
    pub analytical_loss: Option<f64>,
}

impl OptimizeReport {
    /// Relative gap of the best loss above the analytical optimum, in percent.
    pub fn gap_percent(&self) -> Option<f64> {
        self.analytical_loss.map(|a| 100.0 * (self.result.best_loss - a) / a)
    }
}

fn optimize_into(spec: &ExperimentSpec, contact: &ContactConfig, dir: Option<&Path>) -> Result<OptimizeReport> {
    let scenario = &spec.scenario;
    let result = optimize(
        scenario,
        contact,
        &spec.objective(),
        &spec.optimizer,
        &scenario.initial_controls(),
    )?;
    let final_iterate_loss = result.curve.records.last().map_or(f64::NAN, |r| r.loss);
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        let dt = scenario.dt();
        write_curve(dir, &result.curve)?;
        write_controls(dir, &result.controls, dt)?;
        let traj = rollout(scenario, contact, &result.controls)?;
        write_trajectory(dir, &traj.states, &traj.events, dt)?;
        write_events(dir, &traj.events, dt)?;
    }
    Ok(OptimizeReport {
        result,
        final_iterate_loss,
        analytical_loss: spec.analytical_loss(),
    })
}

/// Optimizes from the scenario's initial control.
pub fn run_optimize(spec: &ExperimentSpec, out: Option<&Path>) -> Result<OptimizeReport> {
    let start = Instant::now();
    spec.validate()?;
    let report = optimize_into(spec, &spec.contact, out)?;
    if let Some(dir) = out {
        let summary = json!({
            "best_loss": report.result.best_loss,
            "final_iterate_loss": report.final_iterate_loss,
            "gap_percent": report.gap_percent(),
            "iterations": report.result.curve.records.len().saturating_sub(1),
        });
        RunMetadata::new("optimize", spec, start.elapsed().as_secs_f64(), summary).write(dir)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationCell {
    pub toi_position: bool,
    pub toi_velocity: bool,
    /// Best loss; `None` when the run aborted.
    pub final_loss: Option<f64>,
    pub analytical_loss: Option<f64>,
    /// Why the run aborted, if it did.
    pub error: Option<String>,
}

impl AblationCell {
    pub fn gap_percent(&self) -> Option<f64> {
        Some(100.0 * (self.final_loss? - self.analytical_loss?) / self.analytical_loss?)
    }

    fn label(&self) -> String {
        let flag = |on| if on { "on" } else { "off" };
        format!("tp-{}_tv-{}", flag(self.toi_position), flag(self.toi_velocity))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
}

impl AblationReport {
    pub fn cell(&self, toi_position: bool, toi_velocity: bool) -> Option<&AblationCell> {
        self.cells
            .iter()
            .find(|c| c.toi_position == toi_position && c.toi_velocity == toi_velocity)
    }
}

/// Optimizes under all four correction combinations, in parallel. A cell
/// that fails is reported as aborted; the others still complete.
pub fn run_ablation(spec: &ExperimentSpec, out: Option<&Path>) -> Result<AblationReport> {
    let start = Instant::now();
    spec.validate()?;
    if spec.contact.model != ContactModel::Direct {
        return Err(crate::SimError::Config(format!(
            "ablation toggles the direct model's corrections, got model `{}`",
            spec.contact.model
        ))
        .into());
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    let grid = [(false, false), (true, false), (false, true), (true, true)];
    let cells: Vec<AblationCell> = grid
        .par_iter()
        .map(|&(toi_position, toi_velocity)| {
            let contact = ContactConfig {
                toi_position,
                toi_velocity,
                ..spec.contact
            };
            let mut cell = AblationCell {
                toi_position,
                toi_velocity,
                final_loss: None,
                analytical_loss: spec.analytical_loss(),
                error: None,
            };
            let dir = out.map(|d| d.join(cell.label()));
            match optimize_into(spec, &contact, dir.as_deref()) {
                Ok(report) => cell.final_loss = Some(report.result.best_loss),
                Err(e) => cell.error = Some(e.to_string()),
            }
            cell
        })
        .collect();
    if let Some(dir) = out {
        let fmt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let mut table = Table::create(dir, ABLATION)?;
        for c in &cells {
            table.row([
                c.toi_position.to_string(),
                c.toi_velocity.to_string(),
                fmt(c.final_loss),
                fmt(c.analytical_loss),
                fmt(c.gap_percent()),
                c.error
                    .as_ref()
                    .map_or_else(|| "ok".to_string(), |e| format!("aborted: {e}")),
            ])?;
        }
        table.finish()?;
        let summary = serde_json::to_value(&cells).expect("cells serialize");
        RunMetadata::new("ablate", spec, start.elapsed().as_secs_f64(), summary).write(dir)?;
    }
    Ok(AblationReport { cells })
}

/// Finite-difference checks without and with contact, plus the continuity
/// sweep across a shift in the first contact step.
pub fn run_gradcheck(spec: &ExperimentSpec, out: Option<&Path>) -> Result<GradcheckReport> {
    let start = Instant::now();
    spec.validate()?;
    let scenario = &spec.scenario;
    let objective = spec.objective();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let quiet = no_contact_controls(scenario, &mut rng);
    let entries = sample_entries(scenario.steps, GRADCHECK_ENTRIES, &mut rng);
    let no_contact = check_gradient(scenario, &spec.contact, &objective, &quiet, &entries, FD_STEP)?;
    let no_contact_events = rollout(scenario, &spec.contact, &quiet)?.events.len();

    let busy = perturbed_controls(scenario, CONTACT_NOISE, &mut rng);
    let entries = sample_entries(scenario.steps, GRADCHECK_ENTRIES, &mut rng);
    let contact = check_gradient(scenario, &spec.contact, &objective, &busy, &entries, FD_STEP)?;
    let contact_events = rollout(scenario, &spec.contact, &busy)?.events.len();

    let continuity = continuity_sweep(scenario, SWEEP_LATERAL, &SWEEP_SPACINGS, SWEEP_HALF_POINTS)?;
    let report = GradcheckReport {
        no_contact,
        no_contact_events,
        contact,
        contact_events,
        continuity,
    };

    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut table = Table::create(dir, GRADCHECK)?;
        let cases: [(&str, &[FdProbe]); 2] = [("no-contact", &report.no_contact), ("contact", &report.contact)];
        for (case, probes) in cases {
            for p in probes {
                table.row([
                    case.to_string(),
                    p.step.to_string(),
                    p.axis.label().to_string(),
                    p.adjoint.to_string(),
                    p.finite_difference.to_string(),
                    p.rel_error.to_string(),
                    p.branch_flip.to_string(),
                ])?;
            }
        }
        table.finish()?;
        let mut table = Table::create(dir, CONTINUITY)?;
        for curve in &report.continuity.curves {
            for p in &curve.points {
                table.row([
                    curve.spacing.to_string(),
                    curve.toi_velocity.to_string(),
                    p.alpha.to_string(),
                    p.v2.x.to_string(),
                    p.v2.y.to_string(),
                    p.contact_step.to_string(),
                ])?;
            }
        }
        table.finish()?;
        let jumps: Vec<_> = report
            .continuity
            .curves
            .iter()
            .map(|c| json!({ "spacing": c.spacing, "toi_velocity": c.toi_velocity, "max_jump": c.max_adjacent_difference() }))
            .collect();
        let summary = json!({
            "max_rel_error_no_contact": report.max_error_no_contact(),
            "max_rel_error_contact": report.max_error_contact(),
            "contact_entries_checked": report.contact_entries_checked(),
            "no_contact_events": report.no_contact_events,
            "contact_events": report.contact_events,
            "alpha_shift": report.continuity.alpha_shift,
            "continuity": jumps,
        });
        RunMetadata::new("gradcheck", spec, start.elapsed().as_secs_f64(), summary).write(dir)?;
    }
    Ok(report)
}
