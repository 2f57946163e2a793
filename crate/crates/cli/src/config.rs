//! Experiment configuration: flags, flat key/value documents and defaults.
//!
//! Resolution order is command-line flag, then config document, then
//! built-in default. `output-dir` additionally falls back to the
//! `RC_LAB_OUTPUT_DIR` environment variable before its default.
//!
//! A config document holds one `key = value` pair per line. Keys are the
//! long flag names without dashes prefix (`epsilon`, `output-dir`, ...);
//! `#` starts a comment. `n` may repeat or carry a comma-separated list.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;
use serde::Serialize;
use thiserror::Error;

use rc_lab_core::scaling::m_rule;
use rc_lab_core::{ChannelLaw, Policy};

pub const OUTPUT_DIR_ENV: &str = "RC_LAB_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "rc-lab-out";
pub const DEFAULT_GRID: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];
pub const DEFAULT_SIMULATE_N: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid value for `{key}`: {message}")]
pub struct UsageError {
    pub key: String,
    pub message: String,
}

impl UsageError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Sweep,
    FalkCheck,
    DistCheck,
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulate" => Ok(Self::Simulate),
            "sweep" => Ok(Self::Sweep),
            "falk-check" => Ok(Self::FalkCheck),
            "dist-check" => Ok(Self::DistCheck),
            _ => Err(format!(
                "unknown command `{s}` (expected simulate, sweep, falk-check or dist-check)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown format `{s}` (expected csv, json or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Paper,
    Exponential,
}

impl FromStr for DistributionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "exponential" => Ok(Self::Exponential),
            _ => Err(format!(
                "unknown distribution `{s}` (expected paper or exponential)"
            )),
        }
    }
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    match s.to_ascii_lowercase().as_str() {
        "top-m" | "topm" => Ok(Policy::TopM),
        "random-m" | "randomm" => Ok(Policy::RandomM),
        _ => Err(format!("unknown policy `{s}` (expected top-m or random-m)")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected a boolean, got `{s}`")),
    }
}

/// Command-line flags. Every field is optional so that unset flags fall
/// through to the config document and then to the defaults.
#[derive(Debug, Default, Parser)]
#[command(
    name = "rc-lab",
    version,
    about = "One-hop throughput experiments under the random connection model"
)]
pub struct Flags {
    /// simulate | sweep | falk-check | dist-check
    #[arg(long)]
    pub command: Option<Command>,
    /// Network size; repeat or comma-separate for a grid
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u64>,
    /// Active pairs for `simulate` (default: the m-rule)
    #[arg(long)]
    pub m: Option<usize>,
    /// Rank from the top for `falk-check` (default: ceil(n^(1/3)))
    #[arg(long)]
    pub rank: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Default: epsilon / 3
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Trials per point (replicates for falk-check, samples for dist-check)
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// top-m | random-m
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<Policy>,
    /// paper | exponential
    #[arg(long)]
    pub distribution: Option<DistributionKind>,
    /// Rate of the exponential law
    #[arg(long)]
    pub rate: Option<f64>,
    /// Use the O(n) sort-all selection instead of the spacing sampler
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = parse_bool)]
    pub oracle_mode: Option<bool>,
    /// Write per-trial CSV for `simulate`
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = parse_bool)]
    pub dump_trials: Option<bool>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// csv | json | both
    #[arg(long)]
    pub format: Option<Format>,
    /// Worker thread cap; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat key = value config document
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// One source of settings. Later layers fill only what earlier ones left
/// unset.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Layer {
    pub command: Option<Command>,
    pub n: Option<Vec<u64>>,
    pub m: Option<usize>,
    pub rank: Option<u64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub noise: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub policy: Option<Policy>,
    pub distribution: Option<DistributionKind>,
    pub rate: Option<f64>,
    pub oracle_mode: Option<bool>,
    pub dump_trials: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

macro_rules! fill {
    ($self:ident, $other:ident; $($f:ident),*) => {
        Layer { $($f: $self.$f.or($other.$f)),* }
    };
}

impl Layer {
    pub fn over(self, under: Layer) -> Layer {
        fill!(self, under; command, n, m, rank, epsilon, delta, beta, noise, trials, seed,
              policy, distribution, rate, oracle_mode, dump_trials, output_dir, format, threads)
    }

    pub fn from_flags(f: &Flags) -> Layer {
        Layer {
            command: f.command,
            n: (!f.n.is_empty()).then(|| f.n.clone()),
            m: f.m,
            rank: f.rank,
            epsilon: f.epsilon,
            delta: f.delta,
            beta: f.beta,
            noise: f.noise,
            trials: f.trials,
            seed: f.seed,
            policy: f.policy,
            distribution: f.distribution,
            rate: f.rate,
            oracle_mode: f.oracle_mode,
            dump_trials: f.dump_trials,
            output_dir: f.output_dir.clone(),
            format: f.format,
            threads: f.threads,
        }
    }

    /// Parses a flat `key = value` document. Unknown keys, repeated scalar
    /// keys and malformed values are errors naming the key.
    pub fn from_document(text: &str) -> Result<Layer, UsageError> {
        fn val<T: FromStr>(key: &str, v: &str) -> Result<T, UsageError>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| UsageError::new(key, e))
        }

        let mut layer = Layer::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                UsageError::new(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key != "n" && !seen.insert(key.to_string()) {
                return Err(UsageError::new(key, "set more than once"));
            }
            match key {
                "command" => layer.command = Some(val(key, value)?),
                "n" => {
                    let grid = layer.n.get_or_insert_with(Vec::new);
                    for part in value.split(',') {
                        grid.push(val(key, part.trim())?);
                    }
                }
                "m" => layer.m = Some(val(key, value)?),
                "rank" => layer.rank = Some(val(key, value)?),
                "epsilon" => layer.epsilon = Some(val(key, value)?),
                "delta" => layer.delta = Some(val(key, value)?),
                "beta" => layer.beta = Some(val(key, value)?),
                "noise" => layer.noise = Some(val(key, value)?),
                "trials" => layer.trials = Some(val(key, value)?),
                "seed" => layer.seed = Some(val(key, value)?),
                "policy" => {
                    layer.policy = Some(parse_policy(value).map_err(|e| UsageError::new(key, e))?)
                }
                "distribution" => layer.distribution = Some(val(key, value)?),
                "rate" => layer.rate = Some(val(key, value)?),
                "oracle-mode" => {
                    layer.oracle_mode =
                        Some(parse_bool(value).map_err(|e| UsageError::new(key, e))?)
                }
                "dump-trials" => {
                    layer.dump_trials =
                        Some(parse_bool(value).map_err(|e| UsageError::new(key, e))?)
                }
                "output-dir" => layer.output_dir = Some(PathBuf::from(value)),
                "format" => layer.format = Some(val(key, value)?),
                "threads" => layer.threads = Some(val(key, value)?),
                other => return Err(UsageError::new(other, "unknown key")),
            }
        }
        Ok(layer)
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n_grid: Vec<u64>,
    pub m: Option<usize>,
    pub rank: Option<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub noise: f64,
    pub trials: u64,
    pub seed: u64,
    pub policy: Policy,
    pub distribution: DistributionKind,
    pub rate: f64,
    pub oracle_mode: bool,
    pub dump_trials: bool,
    pub output_dir: PathBuf,
    pub format: Format,
    pub threads: Option<usize>,
}

/// The part of [`ExperimentConfig`] that determines results. Output
/// location and thread count are left out so that outputs stay
/// byte-identical across them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EffectiveConfig {
    pub command: Command,
    pub n: Vec<u64>,
    pub m: Option<usize>,
    pub rank: Option<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub noise: f64,
    pub trials: u64,
    pub seed: u64,
    pub policy: &'static str,
    pub distribution: DistributionKind,
    pub rate: f64,
    pub oracle_mode: bool,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn effective(&self) -> EffectiveConfig {
        EffectiveConfig {
            command: self.command,
            n: self.n_grid.clone(),
            m: self.m,
            rank: self.rank,
            epsilon: self.epsilon,
            delta: self.delta,
            beta: self.beta,
            noise: self.noise,
            trials: self.trials,
            seed: self.seed,
            policy: match self.policy {
                Policy::TopM => "top-m",
                Policy::RandomM => "random-m",
            },
            distribution: self.distribution,
            rate: self.rate,
            oracle_mode: self.oracle_mode,
            format: self.format,
        }
    }

    pub fn law(&self) -> Result<ChannelLaw, UsageError> {
        match self.distribution {
            DistributionKind::Paper => {
                ChannelLaw::paper(self.epsilon).map_err(|e| UsageError::new("epsilon", e))
            }
            DistributionKind::Exponential => {
                ChannelLaw::exponential(self.rate).map_err(|e| UsageError::new("rate", e))
            }
        }
    }

    fn validate(&self) -> Result<(), UsageError> {
        self.law()?;
        let uses_m_rule = match self.command {
            Command::Simulate => self.m.is_none(),
            Command::Sweep => true,
            Command::FalkCheck | Command::DistCheck => false,
        };
        if uses_m_rule && !(self.delta > 0.0 && self.delta < 1.0 / 3.0) {
            return Err(UsageError::new(
                "delta",
                format!("must lie in (0, 1/3), got {}", self.delta),
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(UsageError::new(
                "beta",
                format!("must be > 0, got {}", self.beta),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(UsageError::new(
                "noise",
                format!("must be >= 0, got {}", self.noise),
            ));
        }
        if self.trials == 0 {
            return Err(UsageError::new("trials", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(UsageError::new("threads", "must be at least 1"));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(UsageError::new("n", "grid must be strictly ascending"));
        }
        if self.n_grid.contains(&0) {
            return Err(UsageError::new("n", "network size must be positive"));
        }
        match self.command {
            Command::Simulate => {
                if self.n_grid.len() != 1 {
                    return Err(UsageError::new(
                        "n",
                        "simulate takes exactly one network size",
                    ));
                }
                let n = self.n_grid[0];
                match self.m {
                    Some(m) if m == 0 || m as u64 > n => {
                        return Err(UsageError::new("m", format!("need 1 <= m <= n = {n}")));
                    }
                    Some(_) => {}
                    None => {
                        m_rule(n, self.delta).map_err(|e| UsageError::new("n", e))?;
                    }
                }
            }
            Command::Sweep => {
                if self.distribution != DistributionKind::Paper {
                    return Err(UsageError::new(
                        "distribution",
                        "sweeps tie m to the paper law's epsilon",
                    ));
                }
                for &n in &self.n_grid {
                    m_rule(n, self.delta).map_err(|e| UsageError::new("n", e))?;
                }
            }
            Command::FalkCheck => {
                for &n in &self.n_grid {
                    let i = self.rank.unwrap_or_else(|| default_rank(n));
                    if i == 0 || i >= n {
                        return Err(UsageError::new("rank", format!("need 1 <= rank < n = {n}")));
                    }
                }
            }
            Command::DistCheck => {}
        }
        Ok(())
    }
}

/// `⌈n^(1/3)⌉`, computed exactly for perfect cubes.
pub fn default_rank(n: u64) -> u64 {
    let mut r = (n as f64).cbrt().round() as u64;
    while r.saturating_mul(r).saturating_mul(r) < n {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Resolves flags over an optional config document over the environment
/// fallback and defaults.
pub fn parse_config(
    flags: &Flags,
    document: Option<&str>,
    env_output_dir: Option<PathBuf>,
) -> Result<ExperimentConfig, UsageError> {
    let file = match document {
        Some(text) => Layer::from_document(text)?,
        None => Layer::default(),
    };
    let l = Layer::from_flags(flags).over(file);
    let command = l.command.unwrap_or(Command::Simulate);
    let epsilon = l.epsilon.unwrap_or(0.3);
    let n_grid = l.n.unwrap_or_else(|| match command {
        Command::Simulate => vec![DEFAULT_SIMULATE_N],
        _ => DEFAULT_GRID.to_vec(),
    });
    let cfg = ExperimentConfig {
        command,
        n_grid,
        m: l.m,
        rank: l.rank,
        epsilon,
        delta: l.delta.unwrap_or(epsilon / 3.0),
        beta: l.beta.unwrap_or(1.0),
        noise: l.noise.unwrap_or(1.0),
        trials: l.trials.unwrap_or(10_000),
        seed: l.seed.unwrap_or(42),
        policy: l.policy.unwrap_or(Policy::TopM),
        distribution: l.distribution.unwrap_or(DistributionKind::Paper),
        rate: l.rate.unwrap_or(1.0),
        oracle_mode: l.oracle_mode.unwrap_or(false),
        dump_trials: l.dump_trials.unwrap_or(false),
        output_dir: l
            .output_dir
            .or(env_output_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        format: l.format.unwrap_or(Format::Both),
        threads: l.threads,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> Flags {
        let mut v = vec!["rc-lab"];
        v.extend_from_slice(args);
        Flags::try_parse_from(v).unwrap()
    }

    #[test]
    fn defaults() {
        let c = parse_config(&flags(&[]), None, None).unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.epsilon, 0.3);
        assert!((c.delta - 0.1).abs() < 1e-15);
        assert_eq!((c.beta, c.noise, c.trials, c.seed), (1.0, 1.0, 10_000, 42));
        assert_eq!(c.policy, Policy::TopM);
        assert_eq!(c.n_grid, vec![1_000_000]);
        assert_eq!(c.format, Format::Both);
        assert!(!c.oracle_mode);
        assert_eq!(c.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn flags_override_file() {
        let c = parse_config(
            &flags(&["--epsilon", "0.5"]),
            Some("epsilon = 1\nbeta=2"),
            None,
        )
        .unwrap();
        assert_eq!(c.epsilon, 0.5);
        assert_eq!(c.beta, 2.0);
        // delta follows the effective epsilon unless set
        assert!((c.delta - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn output_dir_fallbacks() {
        let env = Some(PathBuf::from("/tmp/env-out"));
        let c = parse_config(&flags(&[]), None, env.clone()).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("/tmp/env-out"));
        let c = parse_config(&flags(&[]), Some("output-dir = file-out"), env.clone()).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("file-out"));
        let c = parse_config(
            &flags(&["--output-dir", "flag-out"]),
            Some("output-dir = x"),
            env,
        )
        .unwrap();
        assert_eq!(c.output_dir, PathBuf::from("flag-out"));
    }

    #[test]
    fn delta_out_of_range_is_rejected() {
        let e = parse_config(&flags(&["--delta", "0.4"]), None, None).unwrap_err();
        assert_eq!(e.key, "delta");
        let e = parse_config(&flags(&[]), Some("delta = 0.4"), None).unwrap_err();
        assert_eq!(e.key, "delta");
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let e = Layer::from_document("epsilom = 1").unwrap_err();
        assert_eq!(e.key, "epsilom");
        let e = Layer::from_document("trials = many").unwrap_err();
        assert_eq!(e.key, "trials");
        let e = Layer::from_document("beta = 1\nbeta = 2").unwrap_err();
        assert_eq!(e.key, "beta");
        let e = Layer::from_document("just words").unwrap_err();
        assert_eq!(e.key, "line 1");
        assert!(Flags::try_parse_from(["rc-lab", "--bogus", "1"]).is_err());
    }

    #[test]
    fn document_grid_and_comments() {
        let l = Layer::from_document(
            "# sweep\ncommand = sweep\nn = 1000, 10000\nn = 100000 # more\noracle-mode = true\npolicy = random-m",
        )
        .unwrap();
        assert_eq!(l.command, Some(Command::Sweep));
        assert_eq!(l.n, Some(vec![1_000, 10_000, 100_000]));
        assert_eq!(l.oracle_mode, Some(true));
        assert_eq!(l.policy, Some(Policy::RandomM));
    }

    #[test]
    fn repeated_and_listed_n_flags() {
        let f = flags(&["--command", "sweep", "--n", "1000", "--n", "10000,100000"]);
        assert_eq!(f.n, vec![1_000, 10_000, 100_000]);
        let c = parse_config(&f, None, None).unwrap();
        assert_eq!(c.n_grid, vec![1_000, 10_000, 100_000]);
    }

    #[test]
    fn command_specific_validation() {
        let e = parse_config(&flags(&["--n", "10", "--n", "100"]), None, None).unwrap_err();
        assert_eq!(e.key, "n");
        let e = parse_config(&flags(&["--n", "10", "--m", "11"]), None, None).unwrap_err();
        assert_eq!(e.key, "m");
        let e =
            parse_config(&flags(&["--command", "sweep", "--n", "100,10"]), None, None).unwrap_err();
        assert_eq!(e.key, "n");
        let e = parse_config(
            &flags(&["--command", "falk-check", "--n", "10", "--rank", "10"]),
            None,
            None,
        )
        .unwrap_err();
        assert_eq!(e.key, "rank");
        let e = parse_config(&flags(&["--epsilon", "0"]), None, None).unwrap_err();
        assert_eq!(e.key, "epsilon");
        assert!(Flags::try_parse_from(["rc-lab", "--oracle-mode", "maybe"]).is_err());
        // delta only matters where the m-rule picks m
        let c = parse_config(
            &flags(&["--command", "dist-check", "--epsilon", "1"]),
            None,
            None,
        );
        assert!(c.is_ok());
        let c = parse_config(
            &flags(&["--n", "1000", "--m", "5", "--delta", "0.5"]),
            None,
            None,
        );
        assert!(c.is_ok());
        let e = parse_config(
            &flags(&["--command", "sweep", "--epsilon", "1"]),
            None,
            None,
        )
        .unwrap_err();
        assert_eq!(e.key, "delta");
    }

    #[test]
    fn boolean_flags() {
        assert_eq!(flags(&["--oracle-mode"]).oracle_mode, Some(true));
        assert_eq!(flags(&["--oracle-mode", "false"]).oracle_mode, Some(false));
        let c = parse_config(
            &flags(&["--oracle-mode=false"]),
            Some("oracle-mode = true"),
            None,
        )
        .unwrap();
        assert!(!c.oracle_mode);
    }

    #[test]
    fn cube_root_rank() {
        assert_eq!(default_rank(1_000), 10);
        assert_eq!(default_rank(1_000_000), 100);
        assert_eq!(default_rank(1_001), 11);
        assert_eq!(default_rank(10_000), 22);
        assert_eq!(default_rank(100_000), 47);
        assert_eq!(default_rank(8), 2);
    }
}
