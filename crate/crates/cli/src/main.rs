//! `inertia`: run mining-game experiments and evaluate the bounds.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inertial_mining::{harness, math};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "inertia",
    version,
    about = "Inertial mining simulator and calculators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of an experiment and print the share summary.
    Simulate { config: PathBuf },
    /// Run an experiment at every point of a parameter grid.
    Sweep { sweep: PathBuf },
    /// Run an experiment with the forensic accounting; exits 1 if a bound
    /// check fails.
    Verify { config: PathBuf },
    /// Smallest (J, I) meeting the sufficient conditions.
    CalcInertia {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
    },
    /// Selfish-mining profitability threshold.
    Threshold {
        #[arg(long)]
        gamma: f64,
    },
    /// Long-run share of a selfish miner against honest miners.
    Revenue {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma: f64,
    },
}

fn print(value: &impl serde::Serialize) {
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    // A reader that went away (`| head`) is not worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Simulate { config } => {
            let result = harness::cmd_simulate(&config)?;
            print(&result.aggregate);
        }
        Command::Sweep { sweep } => {
            let rows = harness::cmd_sweep(&sweep)?;
            print(&rows);
        }
        Command::Verify { config } => {
            let result = harness::cmd_verify(&config)?;
            print(&result.aggregate);
            if !result.pass() {
                eprintln!("bound check failed");
                return Ok(ExitCode::from(1));
            }
        }
        Command::CalcInertia { alpha, margin } => print(&math::sufficient_inertia(alpha, margin)?),
        Command::Threshold { gamma } => print(&json!({
            "gamma": gamma,
            "threshold": math::selfish_threshold(gamma)?,
        })),
        Command::Revenue { alpha, gamma } => print(&json!({
            "alpha": alpha,
            "gamma": gamma,
            "revenue": math::selfish_revenue(alpha, gamma)?,
        })),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
