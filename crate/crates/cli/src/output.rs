//! Atomic file output and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Everything needed to rerun a command, plus its wall time.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub model: Option<Value>,
    pub grids: Value,
    pub seeds: Vec<u64>,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub output: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

pub struct Run {
    command: &'static str,
    start: Instant,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            start: Instant::now(),
        }
    }

    /// Writes the payload and then `<out>.manifest.json`.
    pub fn finish(
        self,
        out: &Path,
        payload: &[u8],
        model: Option<Value>,
        grids: Value,
        seeds: Vec<u64>,
        summary: Value,
    ) -> Result<(), CliError> {
        write_atomic(out, payload)?;
        let manifest = RunManifest {
            command: self.command.to_string(),
            model,
            grids,
            seeds,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            output: out.display().to_string(),
            summary,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&manifest_path(out), format!("{text}\n").as_bytes())
    }
}

pub fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn empty_summary() -> Value {
    json!(null)
}
