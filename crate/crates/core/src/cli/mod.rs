//! `shm` command-line front end.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::Loaded;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, bad configuration or a missing input.
    #[error("{0}")]
    Usage(String),
    /// The run completed but a check failed.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) | CliError::Failed(_) => EXIT_VALIDATION,
        }
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Failed(e.to_string())
            }
        }
    )*};
}

failed_from!(
    std::io::Error,
    csv::Error,
    crate::fem::FemError,
    crate::surrogate::SurrogateError,
    crate::popgen::PopgenError,
    crate::signals::SignalError,
    crate::hiermc::HierError,
    crate::anomaly::AnomalyError
);

#[derive(Debug, Parser)]
#[command(name = "shm", version, about = "Monopile modal analysis, population inference and scour detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the FE model against reference frequencies of the 5 MW structure.
    ValidateFe(Common),
    /// Fit the frequency-stiffness surrogate from FE runs.
    FitSurrogate(Common),
    /// Draw a synthetic population dataset.
    Generate(Common),
    /// Simulate wave-excited records and extract their peak frequencies.
    Synthesize(Common),
    /// Run NUTS under the configured pooling regimes.
    Sample(Common),
    /// Score observations by posterior-predictive tail probability.
    Detect(Common),
    /// Write plot-ready data files.
    PlotData(Common),
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (Command::ValidateFe(c)
    | Command::FitSurrogate(c)
    | Command::Generate(c)
    | Command::Synthesize(c)
    | Command::Sample(c)
    | Command::Detect(c)
    | Command::PlotData(c)) = &cli.command;
    let loaded = Loaded::from_file(&c.config, &c.out)?;
    std::fs::create_dir_all(&c.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", c.out.display())))?;
    match &cli.command {
        Command::ValidateFe(_) => commands::validate_fe(&loaded),
        Command::FitSurrogate(_) => commands::fit_surrogate(&loaded),
        Command::Generate(_) => commands::generate_cmd(&loaded),
        Command::Synthesize(_) => commands::synthesize(&loaded),
        Command::Sample(_) => commands::sample_cmd(&loaded),
        Command::Detect(_) => commands::detect(&loaded),
        Command::PlotData(_) => commands::plot_data(&loaded),
    }
}

/// Parse `args` (program name first), run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
