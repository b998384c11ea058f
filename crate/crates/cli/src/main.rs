//! Command-line driver for the R2CH solver.
//!
//! Exit codes: 0 success, 2 config error, 3 solver non-convergence, 4 IO error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use r2ch::convergence::Axis;
use r2ch::io::{
    cmd_conservation, cmd_convergence, cmd_run, convergence_table, load_config, preset_config,
    CommandError, Format, RunConfig,
};
use r2ch::scenarios::catalog;

#[derive(Parser)]
#[command(name = "r2ch", version, about = "Conservative finite differences for the R2CH system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots plus the conserved series.
    Run(Common),
    /// Refinement study in space or time.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Number of table rows; one more run than this is made.
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Conserved quantities at the snapshot times and their drift.
    Conservation(Common),
    /// List the preset catalog.
    Presets,
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Use a preset with its defaults instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Picard stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    viscosity: Option<Switch>,
    /// Viscosity threshold.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Space,
    Time,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => preset_config(name)?,
            (None, None) => unreachable!("clap requires one of them"),
        };
        if let Some(dir) = &self.output_dir {
            cfg.outputs.output_dir = dir.clone();
        }
        if let Some(f) = self.format {
            cfg.outputs.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        if let Some(tol) = self.tol {
            cfg.solver.tol = tol;
        }
        if let Some(v) = self.viscosity {
            cfg.solver.viscosity = matches!(v, Switch::On);
        }
        if let Some(eps) = self.epsilon {
            cfg.solver.epsilon = eps;
        }
        cfg.solver.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let summary = cmd_run(&cfg)?;
            let mut text = format!(
                "{} steps on {}; max {} sweeps per step\nconserved series: {}\n",
                summary.steps,
                cfg.grid(),
                summary.max_iterations,
                summary.conserved.display()
            );
            for p in &summary.snapshots {
                text += &format!("snapshot: {}\n", p.display());
            }
            emit(&text);
        }
        Command::Convergence {
            common,
            axis,
            levels,
        } => {
            let cfg = common.load()?;
            let axis = match axis {
                AxisArg::Space => Axis::Space,
                AxisArg::Time => Axis::Time,
            };
            let study = cmd_convergence(&cfg, axis, levels)?;
            emit(&convergence_table(&study));
        }
        Command::Conservation(common) => {
            let cfg = common.load()?;
            emit(&cmd_conservation(&cfg)?.to_text());
        }
        Command::Presets => {
            let text: String = catalog()
                .iter()
                .map(|p| {
                    format!(
                        "{:<22} M={:<5} tau={:<8} T={:<5} {}\n",
                        p.name, p.grid_points, p.tau, p.t_end, p.description
                    )
                })
                .collect();
            emit(&text);
        }
    }
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe (`r2ch presets | head`).
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
