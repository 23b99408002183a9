//! Experiment drivers behind the command-line front end.
//!
//! A run is described by an [`ExperimentSpec`]: a scenario (built-in name or
//! TOML file), contact settings, optimizer settings and a seed. Every run
//! writes CSV tables plus a `run.json` metadata document into its output
//! directory; the metadata embeds the full configuration so `--scenario run.json`
//! reproduces the run.

mod continuity;
mod gradcheck;
mod output;
mod run;

pub use continuity::{continuity_sweep, locate_contact_shift, ContinuityReport, SweepCurve, SweepPoint};
pub use gradcheck::{
    central_difference, check_gradient, no_contact_controls, perturbed_controls, relative_error, sample_entries, Axis,
    FdProbe, GradcheckReport, FD_STEP,
};
pub use output::{read_controls, RunMetadata, TableSchema, TABLES};
pub use run::{
    run_ablation, run_gradcheck, run_optimize, run_simulate, AblationCell, AblationReport, OptimizeReport,
    SimulateReport,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SimError;
use crate::objective::ObjectiveConfig;
use crate::optimize::OptimizerConfig;
use crate::sim::{ContactConfig, Scenario};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unknown scenario `{0}` (expected `single`, `multi`, or a config file path)")]
    UnknownScenario(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Sim(SimError::Config(_)) => 2,
            ExperimentError::Sim(SimError::Degenerate { .. }) => 3,
            ExperimentError::Sim(SimError::NonFinite { .. }) => 4,
            ExperimentError::Parse { .. } | ExperimentError::UnknownScenario(_) => 2,
            ExperimentError::Io { .. } | ExperimentError::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// On-disk run description. TOML config files and the `spec` member of
/// `run.json` share this schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    #[serde(default)]
    pub contact: ContactConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Seed for finite-difference probe selection and control perturbations.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            contact: ContactConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig::from_scenario(&self.scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.contact.validate()?;
        self.optimizer.validate()?;
        self.objective().validate()?;
        Ok(())
    }

    /// Optimal loss of the continuous-time problem, when known.
    pub fn analytical_loss(&self) -> Option<f64> {
        analytical_loss(&self.scenario.name)
    }
}

/// Optimal losses of the two built-in problems, obtained in closed form.
pub fn analytical_loss(scenario: &str) -> Option<f64> {
    match scenario {
        "single" => Some(0.3115),
        "multi" => Some(0.3737),
        _ => None,
    }
}

/// Resolves a built-in scenario name, a TOML config, or a `run.json`.
pub fn load_spec(name_or_path: &str) -> Result<ExperimentSpec> {
    if let Some(scenario) = Scenario::builtin(name_or_path) {
        return Ok(ExperimentSpec::new(scenario));
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(ExperimentError::UnknownScenario(name_or_path.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let parse_err = |message: String| ExperimentError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let spec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<RunMetadata>(&text)
            .map_err(|e| parse_err(e.to_string()))?
            .spec
    } else {
        toml::from_str::<ExperimentSpec>(&text).map_err(|e| parse_err(e.to_string()))?
    };
    spec.validate()?;
    Ok(spec)
}

/// Scenario part of [`load_spec`].
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    load_spec(name_or_path).map(|s| s.scenario)
}
