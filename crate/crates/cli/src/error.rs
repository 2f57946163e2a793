use std::fmt;
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::UsageError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error("cannot read or write {path}: {message}")]
    Io { path: String, message: String },
    #[error("could not encode output: {0}")]
    Encode(String),
    #[error("could not start the worker pool: {0}")]
    Threads(String),
    #[error(transparent)]
    Compute(#[from] rc_lab_core::Error),
    #[error("{0}")]
    Sweep(String),
}

impl RunError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn encode(e: impl fmt::Display) -> Self {
        Self::Encode(e.to_string())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
            Self::Encode(_) => "encode",
            Self::Threads(_) => "threads",
            Self::Compute(_) => "compute",
            Self::Sweep(_) => "sweep",
        }
    }

    /// Process exit status: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable form, as written to stderr and the manifest.
    pub fn record(&self) -> Value {
        let mut v = json!({ "kind": self.kind(), "message": self.to_string() });
        if let Self::Usage(u) = self {
            v["key"] = json!(u.key);
        }
        v
    }
}
