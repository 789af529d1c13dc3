//! Deterministic output files. CSV bodies are byte-identical across runs of
//! the same build and config; anything time-dependent (timestamps, runtimes)
//! goes to the metadata sidecar instead.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_digest(text: &str) -> String {
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// --out beats RAMANPAIR_OUT beats the config's output.dir beats cwd.
pub fn output_dir(flag: &Option<PathBuf>, from_config: &Option<String>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("RAMANPAIR_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    from_config.as_ref().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

pub struct CsvWriter {
    lines: Vec<String>,
}

impl CsvWriter {
    pub fn new(columns: &[&str]) -> Self {
        CsvWriter {
            lines: vec![
                format!("# ramanpair v{VERSION}"),
                columns.join(","),
            ],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn write(self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.lines.join("\n") + "\n")?;
        Ok(())
    }
}

/// Shortest-roundtrip float formatting; `Display` for f64 is deterministic
/// and parses back exactly.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub unix_timestamp: u64,
    pub runtime_seconds: f64,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_text: Option<String>,
    /// Per-point wall times for `sweep`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point_runtimes_seconds: Option<Vec<f64>>,
}

pub fn write_metadata(
    dir: &Path,
    command: &str,
    runtime_seconds: f64,
    digest: &str,
    config_text: Option<&str>,
    point_runtimes_seconds: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let meta = Metadata {
        command: command.into(),
        version: VERSION.into(),
        unix_timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        runtime_seconds,
        config_digest: digest.into(),
        config_text: config_text.map(String::from),
        point_runtimes_seconds,
    };
    write_json(&dir.join("metadata.json"), &meta)
}
