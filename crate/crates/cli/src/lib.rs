//! Command-line front end: baselines, policy optimization, robust
//! ensembles, demand calibration and benchmarks, driven by a JSON config.

pub mod commands;
pub mod config;
pub mod report;

use std::path::Path;

use thiserror::Error;

use aviopt::gradopt::OptError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("writing output: {0}")]
    Output(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl From<OptError> for CliError {
    fn from(e: OptError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Data(_) => 4,
            CliError::Output(_) | CliError::Run(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Converged => 0,
            Outcome::NotConverged => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Baseline,
    Optimize,
    Robust,
    Calibrate,
    Bench,
}

/// Load `config_path` (bundled defaults when `None`), then run `command`
/// writing into `out`.
pub fn run(command: Command, config_path: Option<&Path>, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    let (config, base) = match config_path {
        Some(p) => (config::read_config(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (config::RunConfig::default(), std::env::current_dir().unwrap_or_default()),
    };
    let loaded = config::load_run(config, &base)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    match command {
        Command::Baseline => commands::baseline(&loaded, out, seed),
        Command::Optimize => commands::optimize(&loaded, out, seed),
        Command::Robust => commands::robust(&loaded, out, seed),
        Command::Calibrate => commands::calibrate(&loaded, out),
        Command::Bench => commands::bench(&loaded, out),
    }
}
