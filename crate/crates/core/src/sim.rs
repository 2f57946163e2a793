//! One time slot of the one-hop network.
//!
//! Sources and destinations are disjoint index sets. Only the `m` direct
//! gains of the active pairs and the `m(m-1)` cross gains between them are
//! ever drawn; every other link is irrelevant to the slot. Cross gains are
//! fresh parent-law draws because selection looks only at direct links, and
//! all links are i.i.d.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{ChannelLaw, ParentDistribution};
use crate::error::{domain, Result};
use crate::order_stats::{sample_top_order_stats, sample_top_order_stats_naive};
use crate::seed;

/// Which pairs switch on in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// The `m` pairs with the strongest direct links.
    TopM,
    /// `m` pairs chosen without looking at the channel.
    RandomM,
}

/// How the top `m` direct gains are drawn under [`Policy::TopM`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TopSampler {
    /// O(m) uniform-spacing recursion.
    #[default]
    Spacing,
    /// Draw all `n` gains and sort. Verification oracle.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n: u64,
    pub m: usize,
    pub beta: f64,
    pub noise: f64,
    pub policy: Policy,
    pub distribution: ChannelLaw,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub sampler: TopSampler,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m as u64 > self.n {
            return Err(domain(format!(
                "need 1 <= m <= n, got m={}, n={}",
                self.m, self.n
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(domain(format!(
                "beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(domain(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        if self.trials == 0 {
            return Err(domain("trials must be at least 1"));
        }
        Ok(())
    }
}

/// One slot's realisation. Index `k` refers to the `k`-th strongest active
/// pair throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub direct_gains: Vec<f64>,
    /// Sum of the cross gains from the other active sources into receiver `k`.
    pub interference: Vec<f64>,
    pub sinr: Vec<f64>,
    pub successes: usize,
}

impl TrialOutcome {
    /// Index of the weakest active pair.
    pub fn weakest(&self) -> usize {
        self.direct_gains.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputEstimate {
    pub mean_m: f64,
    pub std_error: f64,
    pub trials: u64,
    pub success_rate: f64,
    /// Set when a single trial leaves the standard error undefined.
    pub degenerate: bool,
}

impl ThroughputEstimate {
    /// Estimate from exact integer sums of `M` and `M²`.
    pub fn from_sums(m: usize, trials: u64, sum: u64, sum_sq: u128) -> Self {
        let t = trials as f64;
        let mean = sum as f64 / t;
        let (std_error, degenerate) = if trials < 2 {
            (0.0, true)
        } else {
            let var = (sum_sq as f64 - sum as f64 * mean) / (t - 1.0);
            (var.max(0.0).sqrt() / t.sqrt(), false)
        };
        Self {
            mean_m: mean,
            std_error,
            trials,
            success_rate: mean / m as f64,
            degenerate,
        }
    }
}

/// Direct gains of the active pairs, strongest first.
pub fn select_active_pairs<D, R>(
    n: u64,
    m: usize,
    policy: Policy,
    sampler: TopSampler,
    d: &D,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    D: ParentDistribution + ?Sized,
    R: Rng + ?Sized,
{
    if m == 0 || m as u64 > n {
        return Err(domain(format!("need 1 <= m <= n, got m={m}, n={n}")));
    }
    match (policy, sampler) {
        (Policy::TopM, TopSampler::Spacing) => sample_top_order_stats(d, n, m, rng),
        (Policy::TopM, TopSampler::Naive) => sample_top_order_stats_naive(d, n, m, rng),
        (Policy::RandomM, _) => {
            // Any fixed subset's direct gains are i.i.d. parent draws.
            let mut gains: Vec<f64> = (0..m)
                .map(|_| d.quantile_unchecked(rng.random::<f64>()))
                .collect();
            gains.sort_unstable_by(|a, b| b.total_cmp(a));
            Ok(gains)
        }
    }
}

/// `direct / (noise + interference)`; `+∞` when the denominator vanishes.
pub fn sinr(direct: f64, interference_sum: f64, noise: f64) -> f64 {
    let denom = noise + interference_sum;
    if denom > 0.0 {
        direct / denom
    } else {
        f64::INFINITY
    }
}

pub fn run_trial<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<TrialOutcome> {
    cfg.validate()?;
    let d = &cfg.distribution;
    let direct_gains = select_active_pairs(cfg.n, cfg.m, cfg.policy, cfg.sampler, d, rng)?;
    let interference: Vec<f64> = (0..cfg.m)
        .map(|_| {
            (1..cfg.m)
                .map(|_| d.quantile_unchecked(rng.random::<f64>()))
                .sum()
        })
        .collect();
    let sinr: Vec<f64> = direct_gains
        .iter()
        .zip(&interference)
        .map(|(&g, &i)| sinr(g, i, cfg.noise))
        .collect();
    let successes = sinr.iter().filter(|&&s| s >= cfg.beta).count();
    Ok(TrialOutcome {
        direct_gains,
        interference,
        sinr,
        successes,
    })
}

/// Runs every trial of `cfg` in parallel and folds the outcomes.
///
/// Trial `t` draws from `seed::substream(cfg.seed, t)`. `reduce` must be
/// associative and commutative for the result to be schedule-independent;
/// integer counters satisfy this exactly.
pub fn map_reduce_trials<T, Map, Id, Red>(
    cfg: &NetworkConfig,
    map: Map,
    identity: Id,
    reduce: Red,
) -> Result<T>
where
    T: Send,
    Map: Fn(u64, &TrialOutcome) -> T + Sync + Send,
    Id: Fn() -> T + Sync + Send,
    Red: Fn(T, T) -> T + Sync + Send,
{
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::substream(cfg.seed, t);
            run_trial(cfg, &mut rng).map(|o| map(t, &o))
        })
        .try_reduce(&identity, |a, b| Ok(reduce(a, b)))
}

/// All trial outcomes of `cfg` in trial order.
pub fn simulate_trials(cfg: &NetworkConfig) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &mut seed::substream(cfg.seed, t)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct SuccessTally {
    pub trials: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl SuccessTally {
    pub fn of(successes: usize) -> Self {
        let s = successes as u64;
        Self {
            trials: 1,
            sum: s,
            sum_sq: (s as u128) * (s as u128),
        }
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    pub fn estimate(&self, m: usize) -> ThroughputEstimate {
        ThroughputEstimate::from_sums(m, self.trials, self.sum, self.sum_sq)
    }
}

/// Mean number of successful receptions per slot over `cfg.trials` slots.
pub fn estimate_throughput(cfg: &NetworkConfig) -> Result<ThroughputEstimate> {
    let tally = map_reduce_trials(
        cfg,
        |_, o| SuccessTally::of(o.successes),
        SuccessTally::default,
        SuccessTally::merge,
    )?;
    Ok(tally.estimate(cfg.m))
}

/// Estimate over an explicit list of outcomes.
pub fn estimate_from_outcomes(m: usize, outcomes: &[TrialOutcome]) -> Result<ThroughputEstimate> {
    if outcomes.is_empty() {
        return Err(domain("no outcomes to summarise"));
    }
    let tally = outcomes
        .iter()
        .map(|o| SuccessTally::of(o.successes))
        .fold(SuccessTally::default(), SuccessTally::merge);
    Ok(tally.estimate(m))
}
