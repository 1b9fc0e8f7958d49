//! `masslet` command-line driver.
//!
//! Configuration precedence: command-line flags (`--override`, `--out`) beat
//! the `--config` file, which beats the `--seed-scenario` preset, which beats
//! built-in defaults.
//!
//! Exit codes: 0 success or all checks pass, 1 validation failure, 2 usage,
//! configuration or I/O error, 3 numerical instability.

mod commands;
mod config;
mod output;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use commands::{EXIT_UNSTABLE, EXIT_USAGE};
use config::Layers;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "masslet", version, about = "Bead-on-string transparency laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Preset to start from: bradyon_fig2, tachyon_fig3, conservation, surfer
    #[arg(long, global = true)]
    seed_scenario: Option<String>,
    /// Set a configuration key, e.g. --override particle.speed=0.2
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

impl Common {
    fn layers(&self) -> Layers<'_> {
        Layers {
            config: self.config.as_deref(),
            seed: self.seed_scenario.as_deref(),
            overrides: &self.overrides,
            out: self.out.as_deref(),
        }
    }

    fn setup(&self) -> Result<config::Setup> {
        config::resolve(&self.layers().load()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the closed-form field, phases and derived constants
    Analytic {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sample times
        #[arg(long, value_delimiter = ',', default_value = "0")]
        times: Vec<f64>,
        /// Sample positions as start:stop:count (default: grid nodes)
        #[arg(long)]
        positions: Option<String>,
    },
    /// Integrate the coupled string and bead
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run a validation scenario and print a pass/fail table
    Validate {
        #[command(flatten)]
        common: Common,
        /// bradyon_fig2, tachyon_fig3, dispersion, conservation, convergence or all
        scenario: Option<String>,
        /// Grid cells (default per scenario)
        #[arg(long)]
        nodes: Option<usize>,
        /// Print the summary as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Measure observed spatial and temporal orders
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Number of refinement levels
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Run the Cartesian product of parameter axes
    Sweep {
        #[command(flatten)]
        common: Common,
        /// key=v1,v2,... or key=start:stop:count
        #[arg(long = "axis", value_name = "KEY=VALUES", required = true)]
        axes: Vec<String>,
    },
}

fn linspace(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else { bail!("positions must be start:stop:count, got {spec:?}") };
    let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
    let n: usize = n.trim().parse()?;
    Ok(match n {
        0 => bail!("positions count must be >= 1"),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    })
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analytic { common, times, positions } => {
            let xs = positions.as_deref().map(linspace).transpose()?;
            commands::analytic(&common.setup()?, &times, xs.as_deref())
        }
        Command::Simulate { common } => commands::simulate(&common.setup()?),
        Command::Validate { common, scenario, nodes, json } => {
            let Some(name) = scenario.or(common.seed_scenario.clone()) else {
                bail!("validate needs a scenario name (or --seed-scenario)");
            };
            commands::validate(&name, nodes, json, common.out.as_deref())
        }
        Command::Convergence { common, levels } => commands::convergence(&common.setup()?, levels),
        Command::Sweep { common, axes } => {
            let axes = axes.iter().map(|a| commands::parse_axis(a)).collect::<Result<Vec<_>>>()?;
            // each point sets its own output directory
            let base = Common { out: None, ..common.clone() }.layers().table()?;
            let out = match common.out.clone() {
                Some(out) => out,
                None => PathBuf::from(config::from_table(base.clone())?.directory()),
            };
            commands::sweep(base, &axes, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let unstable = e.chain().any(|c| {
                matches!(c.downcast_ref::<masslet::solver::SolverError>(), Some(masslet::solver::SolverError::NonFinite { .. }))
            });
            ExitCode::from(if unstable { EXIT_UNSTABLE } else { EXIT_USAGE })
        }
    }
}
