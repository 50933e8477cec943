//! Command line front end: run single sessions, experiment sweeps, solver
//! self-checks, and print the built-in configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use faastream::config::OptimizerKind;
use faastream::error::Error;
use faastream::optimizer::oracle_check;
use faastream::output::{steps_csv, summary_text, write_file};
use faastream::simulator::{run_session, RunOptions};
use faastream::sweep::{run_sweep, write_outputs, SweepSpec};
use faastream::{ConfigFile, PricingConfig, SessionConfig};

#[derive(Parser)]
#[command(name = "faastream", version, about = "Serverless streaming session simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session and write its per-step CSV and summary.
    Simulate {
        /// Session (and optionally pricing) configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pricing configuration file; overrides the config file's pricing.
        #[arg(long)]
        pricing: Option<PathBuf>,
        /// Allocation strategy.
        #[arg(long, default_value = "smart")]
        optimizer: String,
        /// Random seed; overrides the configured one.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for steps.csv and summary.toml.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment sweep described by a spec file.
    Sweep {
        /// Sweep specification file.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for the sweep CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the exact solver against the brute-force oracle on random
    /// instances; fails if any instance disagrees.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        instances: u32,
        #[arg(long, default_value_t = 4)]
        max_spectators: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the built-in session and pricing configuration.
    Defaults,
}

fn load_configs(
    config: Option<&PathBuf>,
    pricing: Option<&PathBuf>,
) -> Result<(SessionConfig, PricingConfig), Error> {
    let base = match config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile { session: None, pricing: None },
    };
    let session = base.session.unwrap_or_default();
    let mut effective_pricing = base.pricing.unwrap_or_default();
    if let Some(path) = pricing {
        let file = ConfigFile::load(path)?;
        effective_pricing = file
            .pricing
            .ok_or_else(|| Error::config(format!("{} has no [pricing] table", path.display())))?;
    }
    Ok((session, effective_pricing))
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, pricing, optimizer, seed, out } => {
            let (session, pricing_config) = load_configs(config.as_ref(), pricing.as_ref())?;
            let kind: OptimizerKind = optimizer.parse()?;
            let seed = seed.unwrap_or(session.rng_seed);
            let trace =
                run_session(&session, &pricing_config, kind, seed, RunOptions::default())?;
            let summary = summary_text(&trace);
            if let Some(dir) = out {
                write_file(&dir.join("steps.csv"), &steps_csv(&trace))?;
                write_file(&dir.join("summary.toml"), &summary)?;
            }
            print!("{summary}");
            Ok(())
        }
        Command::Sweep { spec, out } => {
            let spec = SweepSpec::load(&spec)?;
            let result = run_sweep(&spec, RunOptions::default())?;
            write_outputs(&result, &out)?;
            println!(
                "swept {} over {} values x {} replications; results in {}",
                result.variable.as_str(),
                result.labels.len(),
                result.replications,
                out.display()
            );
            Ok(())
        }
        Command::OracleCheck { instances, max_spectators, seed } => {
            let report = oracle_check(instances, max_spectators, seed)?;
            println!(
                "oracle check passed: {} instances, max ETP deviation {:.3e}",
                report.instances, report.max_deviation
            );
            Ok(())
        }
        Command::Defaults => {
            print!("{}", ConfigFile::defaults().to_toml());
            Ok(())
        }
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Contract(_) | Error::InstanceTooLarge(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
