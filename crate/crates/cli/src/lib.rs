//! The `coach-ope` command line.
//!
//! Every subcommand resolves its settings from defaults, then an optional
//! TOML file (`--config`), then flags, and embeds the resolved settings in
//! the report it writes.

mod args;
mod commands;
mod config;
mod report;

use std::ffi::OsString;

use clap::Parser;
use serde::Serialize;

pub use args::{Cli, Command, DiagnoseArgs, EstimatorArgs, EvaluateArgs, SimulateArgs, SynthArgs};
pub use config::{
    DiagnoseConfig, EstimatorSettings, EvaluateConfig, FileConfig, SimulateConfig, SynthConfig,
};
pub use report::{Envelope, SCHEMA_DIAGNOSE, SCHEMA_EVALUATE, SCHEMA_SIMULATE, SCHEMA_SYNTH, SCHEMA_TRUTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    DataValidation,
    EstimationFailure,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::DataValidation => 3,
            ErrorKind::EstimationFailure => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::DataValidation,
            message: message.into(),
        }
    }

    pub fn estimation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::EstimationFailure,
            message: message.into(),
        }
    }

    /// The machine-readable error object written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind,
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let message = e.render().to_string();
            let message = message
                .trim()
                .trim_start_matches("error: ")
                .lines()
                .next()
                .unwrap_or_default()
                .to_string();
            eprintln!("{}", CliError::usage(message).to_json());
            return ErrorKind::Usage.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.kind.exit_code()
        }
    }
}

/// Runs an already parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::usage("threads must be >= 1"));
    }
    let job = || match &cli.command {
        Command::Evaluate(a) => commands::evaluate(&EvaluateConfig::resolve(a, &file)?, a.out.as_deref(), a.csv_dir.as_deref()),
        Command::Diagnose(a) => commands::diagnose(&DiagnoseConfig::resolve(a, &file)?, a.out.as_deref(), a.csv_dir.as_deref()),
        Command::Simulate(a) => commands::simulate(&SimulateConfig::resolve(a, &file)?, a.out.as_deref(), a.csv.as_deref()),
        Command::Synth(a) => commands::synth(&SynthConfig::resolve(a, &file)?, &a.out, a.truth.as_deref()),
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {n} worker threads: {e}")))?
            .install(job),
        None => job(),
    }
}
