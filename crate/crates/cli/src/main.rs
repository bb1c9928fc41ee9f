//! `oscchain`: dispersion, gap, energy, covariance, simulation and
//! acceptance runs for a driven harmonic chain.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical guard (gap or
//! positivity), 4 acceptance failure, 1 anything else (I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use oscchain::experiment::ExperimentConfig;
use oscchain::Error;

mod commands;
mod output;

use commands::Status;
use output::{OutDir, Stamp};

#[derive(Parser, Debug)]
#[command(name = "oscchain", version, about = "Driven harmonic chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML, or JSON when the extension is .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in recipe used when no config file is given.
    #[arg(long, global = true, default_value = "s1")]
    scenario: String,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for replica runs; all cores when omitted.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// omega^2 on a 2048-point grid and the spectral set.
    Dispersion,
    /// Distance of the force spectrum from the frequency band.
    GapCheck,
    /// Mean energy of the stationary state.
    Alpha,
    /// Stationary site variances and their decay rate.
    Covariance,
    /// Monte Carlo ensemble of truncated chains.
    Simulate,
    /// All acceptance criteria.
    Verify,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = if path.extension().is_some_and(|e| e == "json") {
        ExperimentConfig::from_json(&text)?
    } else {
        ExperimentConfig::from_toml(&text)?
    };
    Ok(cfg)
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => {
            let cfg = ExperimentConfig::scenario(&cli.scenario)?;
            cfg.validate()?;
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Status> {
    if cli.workers == Some(0) {
        return Err(Error::Config("--workers must be positive".into()).into());
    }
    let cfg = resolve_config(cli)?;
    let replicas = matches!(cli.command, Command::Simulate).then_some(cfg.replicas);
    let out = OutDir::create(&cli.out, Stamp::new(&cfg, replicas))?;
    out.config_echo(&cfg)?;
    match cli.command {
        Command::Dispersion => commands::dispersion(&cfg, &out),
        Command::GapCheck => commands::gap_check(&cfg, &out),
        Command::Alpha => commands::alpha(&cfg, &out),
        Command::Covariance => commands::covariance(&cfg, &out),
        Command::Simulate => commands::simulate_ensemble(&cfg, &out, cli.workers),
        Command::Verify => {
            let given = cli.config.as_ref().map(|_| &cfg);
            commands::verify(given, cli.seed.unwrap_or(1), cli.workers, &out)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical_guard() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::AcceptanceFailed) => {
            eprintln!("acceptance failures, see verify.json");
            ExitCode::from(4)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
