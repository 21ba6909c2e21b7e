//! `stance` command-line tool: dataset validation, benchmark runs and
//! combined reports.

pub mod args;
mod data;
mod manifest;
mod report;
mod run;
pub mod settings;
mod validate;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;
use tracing_subscriber::EnvFilter;

pub use manifest::RunManifest;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("dataset statistics differ from the published table")]
    Mismatch,
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
    #[error(transparent)]
    Failure(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) | CliError::Mismatch | CliError::IncompatibleRuns(_) => 2,
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `argv` and runs the command. Returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let command_line: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.command {
        Command::Validate(a) => validate::cmd_validate(&a),
        Command::Run(a) => run::cmd_run(&a, command_line),
        Command::Report(a) => report::cmd_report(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Failure(inner) => eprintln!("error: {inner:#}"),
                other => eprintln!("error: {other}"),
            }
            e.exit_code()
        }
    }
}
