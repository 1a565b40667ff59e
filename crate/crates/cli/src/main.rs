use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aviopt_cli::{run, Command};

#[derive(Parser)]
#[command(name = "aviopt", version, about = "Aviation decarbonization scenarios and policy optimization")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration; bundled defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized checks; the model itself is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fossil-only baselines with optimized conventional fleet renewal.
    Baseline,
    /// Solve one policy problem.
    Optimize,
    /// Solve the mean-objective problem over all configured backgrounds.
    Robust,
    /// Fit the demand curve to history.
    Calibrate,
    /// Time evaluation and linearization.
    Bench,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Baseline => Command::Baseline,
        Cmd::Optimize => Command::Optimize,
        Cmd::Robust => Command::Robust,
        Cmd::Calibrate => Command::Calibrate,
        Cmd::Bench => Command::Bench,
    };
    let code = match run(command, cli.config.as_deref(), &cli.out, cli.seed) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("aviopt: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
