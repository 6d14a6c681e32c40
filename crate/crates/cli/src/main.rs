//! `qanc`: worked examples, contour clouds, Taylor frames and verification studies.
//!
//! Exit status is 0 on success, 1 on a numerical or runtime failure and 2 on
//! a usage or configuration error.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Example;
use config::{CommonFlags, Resolved};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(qanc::Error),
    Io(std::io::Error),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<qanc::Error> for CliError {
    fn from(e: qanc::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use qanc::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::Config(_)
                | E::Json(_)
                | E::InvalidGrid(_)
                | E::InvalidDimension(_)
                | E::InvalidParameter(_)
                | E::UnsupportedFamily(_)
                | E::EmptyStudy => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qanc", version, about = "Approximate ancillary contours from quantile-function models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a built-in worked example end to end.
    Example {
        #[arg(value_enum)]
        name: Example,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Contour cloud through the observed data.
    Contour {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Velocity, acceleration and second fundamental form at the fit.
    Frame {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Replicated order studies or the quadrature identity.
    Verify {
        /// Study to run with defaults when the config has none:
        /// ancillarity-order, partition-order or quadrature.
        #[arg(long)]
        study: Option<String>,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (outputs, cfg) = match cli.command {
        Command::Example { name, flags } => {
            let cfg = Resolved::new(&flags, "example")?;
            (commands::example(name, &cfg)?, cfg)
        }
        Command::Contour { flags } => {
            let cfg = Resolved::new(&flags, "contour")?;
            (commands::contour(&cfg)?, cfg)
        }
        Command::Frame { flags } => {
            let cfg = Resolved::new(&flags, "frame")?;
            (commands::frame(&cfg)?, cfg)
        }
        Command::Verify { study, flags } => {
            let cfg = Resolved::new(&flags, "verify")?;
            (commands::verify(&cfg, study.as_deref())?, cfg)
        }
    };
    outputs.commit(&cfg.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
