//! File writers. Every file carries the tool version and the effective
//! configuration; nothing time- or host-dependent is written, so reruns
//! produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::EffectiveConfig;
use crate::error::RunError;

pub const TOOL: &str = "rc-lab";

/// A CSV cell.
pub enum Cell {
    Int(u64),
    Real(f64),
    Flag(bool),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

/// Reals in scientific notation with 17 significant digits, which
/// round-trips every `f64`.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn cell(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Real(v) => real(*v),
        Cell::Flag(v) => v.to_string(),
    }
}

/// Collects the files of one run and writes them under `dir`.
pub struct Writer {
    dir: PathBuf,
    version: &'static str,
    config: EffectiveConfig,
    written: Vec<String>,
}

impl Writer {
    pub fn new(
        dir: &Path,
        version: &'static str,
        config: EffectiveConfig,
    ) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            version,
            config,
            written: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, body: String) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| RunError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `# `-prefixed provenance lines, a header and the rows.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), RunError> {
        let config = serde_json::to_string(&self.config).map_err(RunError::encode)?;
        let mut body = String::new();
        let _ = writeln!(body, "# {TOOL} {}", self.version);
        let _ = writeln!(body, "# config: {config}");
        body.push_str(&header.join(","));
        body.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            let line: Vec<String> = row.iter().map(cell).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        self.put(name, body)
    }

    /// Writes `payload`'s fields next to `tool`, `version` and `config`.
    pub fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<(), RunError> {
        let mut doc = serde_json::to_value(payload).map_err(RunError::encode)?;
        let header = self.header()?;
        match (&mut doc, header) {
            (Value::Object(map), Value::Object(h)) => map.extend(h),
            _ => return Err(RunError::encode("JSON payload must be an object")),
        }
        let mut body = serde_json::to_string_pretty(&doc).map_err(RunError::encode)?;
        body.push('\n');
        self.put(name, body)
    }

    fn header(&self) -> Result<Value, RunError> {
        Ok(json!({
            "tool": TOOL,
            "version": self.version,
            "config": serde_json::to_value(&self.config).map_err(RunError::encode)?,
        }))
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn manifest(&mut self, status: &str, error: Option<Value>) -> Result<(), RunError> {
        let payload = json!({
            "status": status,
            "files": self.written.clone(),
            "error": error,
            "roles": "disjoint",
        });
        self.json("manifest.json", &payload)
    }
}
