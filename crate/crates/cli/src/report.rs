use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub const SCHEMA_EVALUATE: &str = "coach-ope/evaluate/1";
pub const SCHEMA_DIAGNOSE: &str = "coach-ope/diagnose/1";
pub const SCHEMA_SIMULATE: &str = "coach-ope/simulate/1";
pub const SCHEMA_SYNTH: &str = "coach-ope/synth/1";
pub const SCHEMA_TRUTH: &str = "coach-ope/truth/1";

/// Common report wrapper: schema version, producer, resolved config and
/// seed, then the command's result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema: &'static str,
    pub generator: &'static str,
    pub status: &'static str,
    pub seed: u64,
    pub config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: R,
}

pub const GENERATOR: &str = concat!("coach-ope ", env!("CARGO_PKG_VERSION"));

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::estimation(format!("cannot write {}: {e}", path.display()))
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::estimation(format!("cannot write to stdout: {e}"))),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}
