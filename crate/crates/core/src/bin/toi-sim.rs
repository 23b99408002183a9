use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use toi_sim::experiment::{
    load_spec, read_controls, run_ablation, run_gradcheck, run_optimize, run_simulate, ExperimentError, ExperimentSpec,
};
use toi_sim::sim::ContactModel;

#[derive(Parser)]
#[command(
    name = "toi-sim",
    version,
    about = "Two-ball contact simulation with time-of-impact corrected gradients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a control sequence and write the trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// controls.csv to replay instead of the scenario's initial control.
        #[arg(long)]
        controls: Option<PathBuf>,
    },
    /// Run gradient descent on the control sequence.
    Optimize(Common),
    /// Optimize under all four on/off combinations of the two corrections.
    Ablate(Common),
    /// Compare adjoint gradients with finite differences.
    Gradcheck(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        matches!(s, Switch::On)
    }
}

#[derive(Args)]
struct Common {
    /// `single`, `multi`, a TOML config, or a run.json from an earlier run.
    #[arg(long, default_value = "single")]
    scenario: String,
    /// Contact model: direct, compliant or pbd.
    #[arg(long)]
    model: Option<ContactModel>,
    #[arg(long, value_enum)]
    toi_position: Option<Switch>,
    #[arg(long, value_enum)]
    toi_velocity: Option<Switch>,
    /// Learning rate.
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    /// Number of descent iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, ExperimentError> {
        let mut spec = load_spec(&self.scenario)?;
        if let Some(model) = self.model {
            spec.contact.model = model;
            if model != ContactModel::Direct {
                spec.contact.toi_position = false;
                spec.contact.toi_velocity = false;
            }
        }
        if let Some(s) = self.toi_position {
            spec.contact.toi_position = s.into();
        }
        if let Some(s) = self.toi_velocity {
            spec.contact.toi_velocity = s.into();
        }
        if let Some(lr) = self.lr {
            spec.optimizer.learning_rate = lr;
        }
        if let Some(iters) = self.iters {
            spec.optimizer.iterations = iters;
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Simulate { common, controls } => {
            let spec = common.spec()?;
            let controls = controls.as_deref().map(read_controls).transpose()?;
            let report = run_simulate(&spec, controls.as_deref(), Some(&common.out))?;
            println!("loss {:.6}  events {}", report.loss, report.rollout.events.len());
            for e in &report.rollout.events {
                println!(
                    "  step {:>4}  t {:.5}  {:<10}  toi {:.3e}{}",
                    e.step,
                    e.time(spec.scenario.dt()),
                    e.pair.label(),
                    e.toi,
                    if e.toi_clamped { " (clamped)" } else { "" }
                );
            }
        }
        Command::Optimize(common) => {
            let spec = common.spec()?;
            let report = run_optimize(&spec, Some(&common.out))?;
            print!(
                "best loss {:.6}  last iterate {:.6}",
                report.result.best_loss, report.final_iterate_loss
            );
            match (report.analytical_loss, report.gap_percent()) {
                (Some(a), Some(g)) => println!("  analytical {a:.4}  gap {g:+.2}%"),
                _ => println!(),
            }
        }
        Command::Ablate(common) => {
            let spec = common.spec()?;
            let report = run_ablation(&spec, Some(&common.out))?;
            let flag = |on| if on { "on " } else { "off" };
            for c in &report.cells {
                match (c.final_loss, &c.error) {
                    (Some(loss), _) => println!(
                        "position {}  velocity {}  loss {loss:.6}{}",
                        flag(c.toi_position),
                        flag(c.toi_velocity),
                        c.gap_percent().map_or_else(String::new, |g| format!("  gap {g:+.2}%"))
                    ),
                    (None, e) => println!(
                        "position {}  velocity {}  aborted: {}",
                        flag(c.toi_position),
                        flag(c.toi_velocity),
                        e.as_deref().unwrap_or("unknown")
                    ),
                }
            }
        }
        Command::Gradcheck(common) => {
            let spec = common.spec()?;
            let report = run_gradcheck(&spec, Some(&common.out))?;
            println!(
                "no contact: {} entries, max rel error {:.2e}",
                report.no_contact.len(),
                report.max_error_no_contact()
            );
            println!(
                "contact:    {} of {} entries without branch flip, max rel error {:.2e}",
                report.contact_entries_checked(),
                report.contact.len(),
                report.max_error_contact()
            );
            for c in &report.continuity.curves {
                println!(
                    "sweep spacing {:.0e}  velocity correction {}  max jump {:.3e}",
                    c.spacing,
                    if c.toi_velocity { "on " } else { "off" },
                    c.max_adjacent_difference()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
