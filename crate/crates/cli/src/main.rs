//! `cdfbound` command-line front end.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, PdfCurveArgs};

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  configuration error (bad flags, unreadable or malformed input, unsupported model)
  3  budget exceeded (cells, integration pieces or partition vertices)
  4  internal invariant violated";

#[derive(Parser)]
#[command(name = "cdfbound", version, about = "Exact values and guaranteed bounds for the output cdf of a feedforward network", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact cdf of a ReLU network under a piecewise-polynomial input density.
    ExactCdf(CommonArgs),
    /// Guaranteed lower and upper cdf bounds for any supported network.
    BoundCdf(CommonArgs),
    /// Write the upper and lower ReLU bounding networks as JSON.
    ApproxNet(CommonArgs),
    /// Finite-difference pdf estimate from a cdf CSV.
    PdfCurve(PdfCurveArgs),
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Budget(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Budget(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<cdfbound::Error> for Failure {
    fn from(e: cdfbound::Error) -> Self {
        match e {
            cdfbound::Error::Budget { .. } => Failure::Budget(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ExactCdf(args) => commands::exact_cdf(&args),
        Command::BoundCdf(args) => commands::bound_cdf(&args),
        Command::ApproxNet(args) => commands::approx_net(&args),
        Command::PdfCurve(args) => commands::pdf_curve(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
