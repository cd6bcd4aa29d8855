//! The `rht` command-line interface.
//!
//! [`run`] parses arguments, runs one subcommand and writes a single report to
//! `--output` or stdout. Exit codes: 0 success, 2 usage error, 3 malformed or
//! unreadable CSV input, 4 a violated invariant inside the library or a failed write.

pub mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Map, Value};

use crate::commands::Outcome;
use crate::config::{Cli, Command, CommonArgs, Format, SEED_ENV};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CSV: i32 = 3;
pub const EXIT_MODULE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Module(#[from] rht_core::Error),
    #[error("cannot write report: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Csv(_) => EXIT_CSV,
            CliError::Module(_) | CliError::Output(_) => EXIT_MODULE,
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&cli, env_seed.as_deref()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("rht: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<(), CliError> {
    let common = common_args(&cli.command);
    let seed = config::resolve_seed(common.seed, env_seed)?;
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Bench(a) => commands::bench(a, seed)?,
        Command::Verify(a) => commands::verify(a, seed)?,
        Command::Kernel(a) => commands::kernel(a, seed)?,
        Command::Distest(a) => commands::distest(a, seed)?,
        Command::Lowerbound(a) => commands::lowerbound(a, seed)?,
    };
    let runtime_ms = start.elapsed().as_millis() as u64;
    let text = render(&outcome, runtime_ms)?;
    match &common.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn common_args(command: &Command) -> &CommonArgs {
    match command {
        Command::Bench(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Kernel(a) => &a.common,
        Command::Distest(a) => &a.common,
        Command::Lowerbound(a) => &a.common,
    }
}

/// Pretty JSON keeps every `runtime_ms` on its own line, so two runs of the
/// same configuration differ only on those lines.
pub fn render(outcome: &Outcome, runtime_ms: u64) -> Result<String, CliError> {
    let config = serde_json::to_value(&outcome.config).map_err(|e| CliError::Output(e.to_string()))?;
    match outcome.config.format {
        Format::Json => {
            let mut report = Map::new();
            report.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
            report.insert("config".into(), config);
            report.insert("runtime_ms".into(), json!(runtime_ms));
            for (k, v) in &outcome.results {
                report.insert(k.clone(), v.clone());
            }
            let mut text =
                serde_json::to_string_pretty(&Value::Object(report)).map_err(|e| CliError::Output(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => outcome.table.to_csv(&config.to_string()),
    }
}
