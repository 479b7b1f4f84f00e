mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use floqeels_core::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "floqeels", version, about = "Electron energy-loss spectra of laser-driven few-level atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Loss/gain spectrum and peak list at one drive setting.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        axis: OmegaAxis,
        /// Also write the spectrum of the undriven atom.
        #[arg(long)]
        reference: bool,
    },
    /// Spectral map over a Rabi-strength or drive-frequency sweep.
    Map {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        axis: OmegaAxis,
        /// `rabi:LO:HI:N` or `omega_l:LO:HI:N`.
        #[arg(long)]
        sweep: String,
    },
    /// Floquet quasienergies and leading Fourier coefficients.
    Floquet {
        #[command(flatten)]
        common: Common,
        /// Also dump every Fourier coefficient.
        #[arg(long)]
        full: bool,
    },
    /// Periodic steady state of the driven, decaying atom.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Also dump every Fourier coefficient in both bases.
        #[arg(long)]
        full: bool,
    },
    /// Run the oracle checks; exits with 3 if any fails.
    Validate {
        /// Built-in scenario; all four are checked when omitted.
        #[arg(conflicts_with_all = ["config", "scenario"])]
        name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Built-in system: two_level, lambda_a, lambda_b or lambda_c.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Drive frequency override.
    #[arg(long = "omega-l")]
    pub omega_l: Option<f64>,
    /// Rabi strength override (largest Rabi-matrix entry).
    #[arg(long)]
    pub rabi: Option<f64>,
    /// Peak pruning threshold override.
    #[arg(long = "peak-tol")]
    pub peak_tol: Option<f64>,
    /// Gaussian broadening FWHM override.
    #[arg(long)]
    pub fwhm: Option<f64>,
    /// Largest Fourier truncation order override.
    #[arg(long = "l-max")]
    pub l_max: Option<usize>,
    /// Electron impact parameter in units of c/ω₀; enables the finite-distance
    /// coupling factor together with --beta.
    #[arg(long = "impact-parameter", requires = "beta")]
    pub impact_parameter: Option<f64>,
    /// Electron speed as a fraction of c.
    #[arg(long, requires = "impact_parameter")]
    pub beta: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "floqeels-out")]
    pub out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct OmegaAxis {
    #[arg(long = "omega-min", default_value_t = -2.5, allow_hyphen_values = true)]
    pub omega_min: f64,
    #[arg(long = "omega-max", default_value_t = 2.5, allow_hyphen_values = true)]
    pub omega_max: f64,
    #[arg(long = "omega-points", default_value_t = 1001)]
    pub omega_points: usize,
}

/// Failure with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 1, error: error.into() }
    }

    pub fn numerical(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: error.into() }
    }

    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 3, error: error.into() }
    }
}

impl From<floqeels_core::Error> for Failure {
    fn from(e: floqeels_core::Error) -> Self {
        match e.kind() {
            ErrorKind::Input => Failure::input(e),
            ErrorKind::Numerical => Failure::numerical(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e)
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Spectrum { common, axis, reference } => {
            commands::spectrum(&argv, &common, &axis, reference)
        }
        Command::Map { common, axis, sweep } => commands::map(&argv, &common, &axis, &sweep),
        Command::Floquet { common, full } => commands::floquet(&argv, &common, full),
        Command::Steady { common, full } => commands::steady(&argv, &common, full),
        Command::Validate { name, common } => commands::validate(&argv, &common, name.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
