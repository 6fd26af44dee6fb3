use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use infodemic_cli::{commands, CliError, Format, RunConfig};

#[derive(Parser)]
#[command(name = "infodemic", version, about = "Stochastic delayed rumor-spreading simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `ensemble.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Run count for the chosen subcommand.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a single path.
    Simulate(Common),
    /// Monte Carlo ensemble with pointwise bands and outbreak metrics.
    Ensemble(Common),
    /// Threshold quantities and mean-square decay of the linearized system.
    Stability(Common),
    /// Sweep the (tau, R0) grid.
    Ablate(Common),
    /// Compare a sweep file against a reference table.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV to compare (defaults to `<out>/sweep.csv`).
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Reference table CSV (defaults to the shipped table).
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

enum RunsTarget {
    Ensemble,
    Stability,
    Sweep,
}

fn load(common: &Common, runs_target: RunsTarget) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.out {
        config.output.dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        config.ensemble.seed = seed;
    }
    if let Some(format) = common.format {
        config.output.format = format;
    }
    if let Some(runs) = common.runs {
        match runs_target {
            RunsTarget::Ensemble => config.ensemble.runs = runs,
            RunsTarget::Stability => config.stability.runs = runs,
            RunsTarget::Sweep => config.sweep.runs = runs,
        }
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&load(&c, RunsTarget::Ensemble)?),
        Command::Ensemble(c) => commands::ensemble(&load(&c, RunsTarget::Ensemble)?),
        Command::Stability(c) => commands::stability(&load(&c, RunsTarget::Stability)?),
        Command::Ablate(c) => commands::ablate(&load(&c, RunsTarget::Sweep)?),
        Command::Compare {
            common,
            sweep,
            reference,
        } => {
            let config = load(&common, RunsTarget::Sweep)?;
            let sweep = sweep.unwrap_or_else(|| config.output.dir.join("sweep.csv"));
            commands::compare(&config, &sweep, reference.as_deref().map(Path::new))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            for line in e.lines() {
                eprintln!("{line}");
            }
            ExitCode::FAILURE
        }
    }
}
