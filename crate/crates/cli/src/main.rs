use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatflux_cli::commands;
use heatflux_cli::{CliError, ExperimentConfig};

/// Identification of enthalpy-dependent boundary heat fluxes.
#[derive(Debug, Parser)]
#[command(name = "heatflux", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed (overrides `noise.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Permit inversion on the grid that generated the data.
    #[arg(long)]
    allow_inverse_crime: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic measurements from the exact fluxes.
    Simulate(Common),
    /// Recover the fluxes from the measurements in the output directory.
    Invert(Common),
    /// Compare the adjoint gradient with finite differences.
    Gradcheck(Common),
    /// Run PQN and Landweber on identical synthetic data.
    Compare(Common),
}

fn run(cli: Cli) -> Result<String, CliError> {
    let (Command::Simulate(c) | Command::Invert(c) | Command::Gradcheck(c) | Command::Compare(c)) =
        &cli.command;
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.noise.seed = seed;
    }
    let out = commands::output_dir(&cfg, c.out.clone());
    let json = |v: &dyn erased::Json| v.to_json();
    Ok(match &cli.command {
        Command::Simulate(_) => json(&commands::simulate(&cfg, &out)?),
        Command::Invert(c) => json(&commands::invert(&cfg, &out, &out, c.allow_inverse_crime)?),
        Command::Gradcheck(_) => {
            let s = commands::gradcheck(&cfg, &out)?;
            let passed = s.check.passed;
            let text = format!(
                "relative l2 error {:e}, max relative error {:e}, tolerance {:e}: {}",
                s.check.relative_l2_error,
                s.check.max_relative_error,
                s.check.tolerance,
                if passed { "pass" } else { "FAIL" }
            );
            if !passed {
                return Err(CliError::Optimizer(format!(
                    "gradient check failed: {text}"
                )));
            }
            text
        }
        Command::Compare(c) => json(&commands::compare(&cfg, &out, c.allow_inverse_crime)?),
    })
}

mod erased {
    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string_pretty(self).unwrap_or_default()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HEATFLUX_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("heatflux: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
