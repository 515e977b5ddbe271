//! `epiwave` command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 a domain
//! invariant was violated (bad weights, invalid rates, ...), 4 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Invariant(_) => 3,
            Self::Usage(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Input(m) | Self::Invariant(m) => m,
        }
    }
}

impl From<epiwave::Error> for CliError {
    fn from(e: epiwave::Error) -> Self {
        if e.is_input_error() {
            Self::Input(e.to_string())
        } else {
            Self::Invariant(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "epiwave", version, about = "Excess mortality, epidemic waves and SEIR calibration")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Suppress the summary printed to stdout.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Leave the timestamp out of run.json.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    /// Root for relative input paths.
    #[arg(long, global = true, env = "EPIWAVE_DATA_DIR", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reported deaths minus the weighted baseline of earlier years.
    Excess(commands::ExcessArgs),
    /// Split an excess series into waves.
    Waves(commands::WavesArgs),
    /// Grid-search SEIR parameters for one wave.
    Fit(commands::FitArgs),
    /// Forecast the next wave from earlier fits.
    Forecast(commands::ForecastArgs),
    /// Solve the final-size relation.
    Finalsize(commands::FinalsizeArgs),
    /// Integrate an SIR or SEIR model.
    Simulate(commands::SimulateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
