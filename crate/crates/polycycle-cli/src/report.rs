use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

/// Why a run stopped; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Malformed configuration or missing inputs (exit 1).
    Input(String),
    /// The numerics did not deliver (exit 2).
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Input(_) => "input",
            Failure::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<polycycle::Error> for Failure {
    fn from(e: polycycle::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub fn input<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Input(msg.into()))
}

/// The command line as recorded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub outputs: Value,
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

pub fn envelope(config: &RunConfig, defaults: Value, result: Value) -> Value {
    json!({
        "tool": "polycycle",
        "version": polycycle::VERSION,
        "config": config,
        "defaults": defaults,
        "result": result,
    })
}

pub fn error_envelope(config: &RunConfig, failure: &Failure) -> Value {
    json!({
        "tool": "polycycle",
        "version": polycycle::VERSION,
        "config": config,
        "error": { "kind": failure.kind(), "message": failure.message() },
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure::Numerical(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Pretty JSON to `path`, or to stdout when no path is given.
pub fn emit_json(path: Option<&Path>, v: &Value) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(v).expect("values serialize");
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
