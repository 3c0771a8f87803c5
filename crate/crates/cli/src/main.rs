//! `fracduct`: command-line front end for the duct-flow solvers.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CalibrateArgs, CgStudyArgs, FracStudyArgs};
use config::{load_config, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "fracduct",
    version,
    about = "Space-fractional duct-flow solvers"
)]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, same as --output.directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for parameter sweeps.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the duct model once: field, central profile and maximum.
    Solve,
    /// Sweep the pseudo-parabolic solver of A^beta w = 1.
    Fracstudy(FracStudyArgs),
    /// Record PCG convergence histories over (mu, alpha).
    Cgstudy(CgStudyArgs),
    /// Fit (mu, alpha) to a measured profile by lattice search.
    Calibrate(CalibrateArgs),
}

#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl CliError {
    fn report(&self) -> ExitCode {
        match self {
            CliError::Config(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
            CliError::Solver(e) => {
                eprintln!("solver failure: {e:#}");
                ExitCode::from(2)
            }
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.into()))?;
    }
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Fracstudy(args) => commands::fracstudy(&cfg, args),
        Command::Cgstudy(args) => commands::cgstudy(&cfg, args),
        Command::Calibrate(args) => commands::calibrate(&cfg, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
