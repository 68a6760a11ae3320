//! Front-end for `bshape-core`: target generation, reconstruction,
//! evaluation and the loss gradient check.
//!
//! Exit codes: 0 on success, 1 on a usage error (unknown flag, missing or
//! invalid option, unreadable config), 2 on a data error (bad input files,
//! failed writes, failed gradient check).

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod config;
pub mod loss_check;

pub use args::Cli;
pub use config::{FileConfig, RunConfig};

pub const THREADS_ENV: &str = "BSHAPE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Data(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

/// Parses `argv` (program name first) and merges it with the config file.
/// Help and version requests come back as clap errors.
pub fn parse<I, T>(argv: I) -> Result<RunConfig, ParseError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseError::Clap)?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(ParseError::Cli)?,
        None => FileConfig::default(),
    };
    config::resolve(cli.command, file).map_err(ParseError::Cli)
}

#[derive(Debug)]
pub enum ParseError {
    Clap(clap::Error),
    Cli(CliError),
}

/// Report printed on stdout. `passed` is false only for a loss check that
/// exceeded its tolerance; the report is still printed in that case.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: serde_json::Value,
    pub passed: bool,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (report, passed) = match cfg {
        RunConfig::GenTargets(c) => (commands::gen_targets(c)?, true),
        RunConfig::Reconstruct(c) => (commands::reconstruct(c)?, true),
        RunConfig::Evaluate(c) => (commands::evaluate_cmd(c)?, true),
        RunConfig::LossCheck(c) => commands::loss_check(c)?,
    };
    Ok(Outcome { report, passed })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Data(e.into()))
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse(argv) {
        Ok(cfg) => cfg,
        Err(ParseError::Clap(e)) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
        Err(ParseError::Cli(e)) => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            return e.exit_code();
        }
    };
    let result = thread_pool().and_then(|pool| pool.install(|| execute(&cfg)));
    match result {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    eprintln!("error: writing report: {e}");
                    return 2;
                }
            }
            if outcome.passed {
                0
            } else {
                eprintln!("error: gradient check exceeded tolerance");
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
