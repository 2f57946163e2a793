//! Command-line front end for `rc-lab-core`: configuration layering,
//! command dispatch and reproducible CSV/JSON output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, ExperimentConfig, Flags};
pub use error::RunError;
pub use run::{run, Summary};

/// Parses `args` (including the program name), reads `--config` if given,
/// and runs the experiment.
pub fn main_with<I, T>(args: I, env_output_dir: Option<PathBuf>) -> Result<Summary, RunError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = Flags::try_parse_from(args)
        .map_err(|e| config::UsageError::new("arguments", e.to_string().trim_end()))?;
    let document = match &flags.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?),
        None => None,
    };
    let cfg = parse_config(&flags, document.as_deref(), env_output_dir)?;
    run(&cfg)
}
