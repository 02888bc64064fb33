//! Run reports: a JSON record per stage plus an aligned text table.
//!
//! Reports are the reproducibility contract: rerunning a stage with the
//! same inputs, config, and seed must produce byte-identical output,
//! so everything clock-dependent is quarantined in the single `timing`
//! field and the text table carries none of it. Input files are
//! identified by content hash, not path, so a moved-but-equal corpus
//! still reads as the same run.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    /// Wall-clock data, the only field allowed to differ between
    /// identical reruns.
    pub timing: Timing,
    pub config: PipelineConfig,
    /// Logical input name to sha256 of the file consumed.
    pub inputs: BTreeMap<String, String>,
    /// Artifact name to the path written.
    pub artifacts: BTreeMap<String, String>,
    pub metrics: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub wall_ms: u128,
}

impl Timing {
    pub fn start() -> (Timing, std::time::Instant) {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        (Timing { started_unix_ms: started, wall_ms: 0 }, std::time::Instant::now())
    }
}

impl RunReport {
    pub fn render_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Deterministic two-column table over metrics and artifacts.
    pub fn render_table(&self) -> String {
        let mut rows = vec![("command".to_string(), self.command.clone())];
        flatten_value("", &self.metrics, &mut rows);
        for (name, path) in &self.artifacts {
            rows.push((format!("artifact.{name}"), path.clone()));
        }
        for (name, hash) in &self.inputs {
            rows.push((format!("input.{name}"), format!("sha256:{}", &hash[..12])));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (key, value) in rows {
            out.push_str(&format!("{key:<width$}  {value}\n"));
        }
        out
    }

    /// Writes `<command>.json` and `<command>.txt` under the report dir.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        let json_path = dir.join(format!("{}.json", self.command));
        let text_path = dir.join(format!("{}.txt", self.command));
        std::fs::write(&json_path, self.render_json()).map_err(io_err)?;
        std::fs::write(&text_path, self.render_table()).map_err(io_err)?;
        Ok((json_path, text_path))
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Run(erg_core::Error::Io(e))
}

/// Dotted-key rows for scalars; arrays of scalars print inline, nested
/// structures recurse.
fn flatten_value(prefix: &str, value: &serde_json::Value, rows: &mut Vec<(String, String)>) {
    use serde_json::Value;
    let key = |name: &str| {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}.{name}")
        }
    };
    match value {
        Value::Object(map) => {
            for (name, inner) in map {
                flatten_value(&key(name), inner, rows);
            }
        }
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            let joined: Vec<String> = items.iter().map(render_scalar).collect();
            rows.push((prefix.to_string(), format!("[{}]", joined.join(", "))));
        }
        Value::Array(items) => {
            for (i, inner) in items.iter().enumerate() {
                flatten_value(&key(&i.to_string()), inner, rows);
            }
        }
        scalar => rows.push((prefix.to_string(), render_scalar(scalar))),
    }
}

fn render_scalar(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = std::fs::File::open(path).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
