use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, ExperimentSpec, Result};
use crate::objective::ObjectiveConfig;
use crate::optimize::LearningCurve;
use crate::sim::{ContactEvent, State};
use crate::vec2::Vec2;

/// Column layout of one emitted table.
#[derive(Debug, Clone, Copy)]
pub struct TableSchema {
    pub file: &'static str,
    pub columns: &'static [&'static str],
}

pub const TRAJECTORY: TableSchema = TableSchema {
    file: "trajectory.csv",
    columns: &[
        "step", "t", "p1x", "p1y", "v1x", "v1y", "p2x", "p2y", "v2x", "v2y", "events",
    ],
};
pub const EVENTS: TableSchema = TableSchema {
    file: "events.csv",
    columns: &[
        "step",
        "time",
        "pair",
        "depth",
        "toi",
        "toi_clamped",
        "nx",
        "ny",
        "rewound_gap",
    ],
};
pub const LEARNING_CURVE: TableSchema = TableSchema {
    file: "learning_curve.csv",
    columns: &["iteration", "loss", "grad_max_norm", "contacts"],
};
pub const CONTROLS: TableSchema = TableSchema {
    file: "controls.csv",
    columns: &["step", "t", "ux", "uy"],
};
pub const ABLATION: TableSchema = TableSchema {
    file: "ablation.csv",
    columns: &[
        "toi_position",
        "toi_velocity",
        "final_loss",
        "analytical_loss",
        "gap_percent",
        "status",
    ],
};
pub const GRADCHECK: TableSchema = TableSchema {
    file: "gradcheck.csv",
    columns: &[
        "case",
        "step",
        "axis",
        "adjoint",
        "finite_difference",
        "rel_error",
        "branch_flip",
    ],
};
pub const CONTINUITY: TableSchema = TableSchema {
    file: "continuity.csv",
    columns: &["spacing", "toi_velocity", "alpha", "v2x", "v2y", "contact_step"],
};

/// Every table the CLI can emit.
pub const TABLES: &[TableSchema] = &[
    TRAJECTORY,
    EVENTS,
    LEARNING_CURVE,
    CONTROLS,
    ABLATION,
    GRADCHECK,
    CONTINUITY,
];

pub(crate) struct Table {
    writer: csv::Writer<File>,
}

impl Table {
    pub(crate) fn create(dir: &Path, schema: TableSchema) -> Result<Self> {
        let path = dir.join(schema.file);
        let file = File::create(&path).map_err(|e| ExperimentError::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(schema.columns)?;
        Ok(Self { writer })
    }

    pub(crate) fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| ExperimentError::Csv(e.into()))
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))
}

pub(crate) fn write_trajectory(dir: &Path, states: &[State], events: &[ContactEvent], dt: f64) -> Result<()> {
    let mut table = Table::create(dir, TRAJECTORY)?;
    for (i, s) in states.iter().enumerate() {
        // row i is the state after step i - 1
        let labels: Vec<&str> = events
            .iter()
            .filter(|e| i > 0 && e.step == i - 1)
            .map(|e| e.pair.label())
            .collect();
        let mut fields: Vec<String> = vec![i.to_string(), (i as f64 * dt).to_string()];
        for v in [s.p1, s.v1, s.p2, s.v2] {
            fields.push(v.x.to_string());
            fields.push(v.y.to_string());
        }
        fields.push(labels.join(";"));
        table.row(fields)?;
    }
    table.finish()
}

pub(crate) fn write_events(dir: &Path, events: &[ContactEvent], dt: f64) -> Result<()> {
    let mut table = Table::create(dir, EVENTS)?;
    for e in events {
        table.row([
            e.step.to_string(),
            e.time(dt).to_string(),
            e.pair.label().to_string(),
            e.depth.to_string(),
            e.toi.to_string(),
            e.toi_clamped.to_string(),
            e.normal.x.to_string(),
            e.normal.y.to_string(),
            e.rewound_gap.to_string(),
        ])?;
    }
    table.finish()
}

pub(crate) fn write_curve(dir: &Path, curve: &LearningCurve) -> Result<()> {
    let mut table = Table::create(dir, LEARNING_CURVE)?;
    for r in &curve.records {
        table.row([
            r.iteration.to_string(),
            r.loss.to_string(),
            r.grad_max_norm.to_string(),
            r.contacts.to_string(),
        ])?;
    }
    table.finish()
}

pub(crate) fn write_controls(dir: &Path, controls: &[Vec2], dt: f64) -> Result<()> {
    let mut table = Table::create(dir, CONTROLS)?;
    for (i, u) in controls.iter().enumerate() {
        table.row([
            i.to_string(),
            (i as f64 * dt).to_string(),
            u.x.to_string(),
            u.y.to_string(),
        ])?;
    }
    table.finish()
}

/// `run.json`: the full run configuration plus what the run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub objective: ObjectiveConfig,
    pub analytical_loss: Option<f64>,
    pub wall_clock_seconds: f64,
    pub summary: serde_json::Value,
}

impl RunMetadata {
    pub fn new(command: &str, spec: &ExperimentSpec, wall_clock_seconds: f64, summary: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            objective: spec.objective(),
            analytical_loss: spec.analytical_loss(),
            wall_clock_seconds,
            summary,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.json");
        let text = serde_json::to_string_pretty(self).expect("metadata serializes");
        std::fs::write(&path, text).map_err(|e| ExperimentError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Reads a `controls.csv` written by [`write_controls`].
pub fn read_controls(path: &Path) -> Result<Vec<Vec2>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExperimentError::Parse {
                path: path.to_path_buf(),
                message: format!("missing column `{name}`"),
            })
    };
    let (ix, iy) = (column("ux")?, column("uy")?);
    let mut controls = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| {
            record[i].parse::<f64>().map_err(|e| ExperimentError::Parse {
                path: path.to_path_buf(),
                message: format!("row {}: {e}", line + 1),
            })
        };
        controls.push(Vec2::new(field(ix)?, field(iy)?));
    }
    Ok(controls)
}
