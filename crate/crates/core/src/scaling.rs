//! Sweeps over the network size, the activation-count rule, log–log
//! exponent fitting, and empirical checks of the inequalities behind the
//! `m/4` throughput guarantee.
//!
//! With `γ̄` the parent mean and `r` the weakest active pair, the guarantee
//! rests on two events observed in every trial:
//!
//! * interference overshoot, `N₀ + Σ_{j≠r} γ_{j,r} > 2γ̄m`, whose
//!   probability Markov's inequality caps at `(N₀ + (m-1)γ̄) / (2γ̄m)`;
//! * a strong weakest link, `γ_(r) > 2βγ̄m`.
//!
//! When the first fails and the second holds, receiver `r` succeeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::dist::{ChannelLaw, ParentDistribution};
use crate::error::{domain, Error, Result};
use crate::seed;
use crate::sim::{
    map_reduce_trials, NetworkConfig, Policy, SuccessTally, ThroughputEstimate, TopSampler,
    TrialOutcome,
};

/// `max(1, round(n^(1/3 - δ)))`, rounding halves up.
pub fn m_rule(n: u64, delta: f64) -> Result<usize> {
    if n < 2 {
        return Err(domain(format!("m-rule needs n >= 2, got {n}")));
    }
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(domain(format!("delta must lie in (0, 1/3), got {delta}")));
    }
    let m = ((n as f64).powf(1.0 / 3.0 - delta) + 0.5).floor();
    Ok((m as usize).clamp(1, n as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub n_grid: Vec<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub noise: f64,
    pub trials: u64,
    pub seed: u64,
    pub policy: Policy,
    #[serde(default)]
    pub sampler: TopSampler,
}

impl SweepPlan {
    /// Plan with `δ = ε/3`, β = 1, N₀ = 1, 10⁴ trials, seed 42 and the
    /// strongest-pairs policy.
    pub fn new(n_grid: Vec<u64>, epsilon: f64) -> Self {
        Self {
            n_grid,
            epsilon,
            delta: epsilon / 3.0,
            beta: 1.0,
            noise: 1.0,
            trials: 10_000,
            seed: 42,
            policy: Policy::TopM,
            sampler: TopSampler::Spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(domain("sweep grid is empty"));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(domain("sweep grid must be strictly ascending"));
        }
        ChannelLaw::paper(self.epsilon)?;
        for &n in &self.n_grid {
            m_rule(n, self.delta)?;
        }
        Ok(())
    }

    /// Network configuration for grid point `index`.
    pub fn config_at(&self, index: usize) -> Result<NetworkConfig> {
        let n = *self
            .n_grid
            .get(index)
            .ok_or_else(|| domain(format!("grid index {index} out of range")))?;
        let cfg = NetworkConfig {
            n,
            m: m_rule(n, self.delta)?,
            beta: self.beta,
            noise: self.noise,
            policy: self.policy,
            distribution: ChannelLaw::paper(self.epsilon)?,
            trials: self.trials,
            seed: seed::mix(self.seed, index as u64),
            sampler: self.sampler,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Empirical frequencies of the two proof events plus `E[M]/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub markov_event_prob: f64,
    pub markov_bound: f64,
    pub tail_event_prob: f64,
    pub quarter_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub m: usize,
    pub estimate: ThroughputEstimate,
    pub bounds: BoundCheck,
}

/// A sweep that stopped at a failing grid point.
#[derive(Debug, Clone, Error)]
#[error("sweep aborted at grid point {index} (n = {n}): {source}")]
pub struct SweepFailure {
    pub index: usize,
    pub n: u64,
    /// Rows completed before the failure.
    pub partial: Vec<SweepRow>,
    #[source]
    pub source: Error,
}

/// `β(N₀ + (m-1)γ̄) / (2βγ̄m)`.
pub fn markov_bound(m: usize, beta: f64, noise: f64, mean: f64) -> f64 {
    let m = m as f64;
    beta * (noise + (m - 1.0) * mean) / (2.0 * beta * mean * m)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct EventTally {
    successes: SuccessTally,
    markov_hits: u64,
    tail_hits: u64,
}

impl EventTally {
    fn merge(self, o: Self) -> Self {
        Self {
            successes: self.successes.merge(o.successes),
            markov_hits: self.markov_hits + o.markov_hits,
            tail_hits: self.tail_hits + o.tail_hits,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct EventThresholds {
    noise: f64,
    interference: f64,
    direct: f64,
}

impl EventThresholds {
    fn new(cfg: &NetworkConfig) -> Result<Self> {
        if cfg.policy != Policy::TopM {
            return Err(domain(
                "bound checks apply to the strongest-pairs policy only",
            ));
        }
        let mean = cfg.distribution.mean()?;
        let m = cfg.m as f64;
        Ok(Self {
            noise: cfg.noise,
            interference: 2.0 * mean * m,
            direct: 2.0 * cfg.beta * mean * m,
        })
    }

    fn tally(&self, o: &TrialOutcome) -> EventTally {
        let r = o.weakest();
        EventTally {
            successes: SuccessTally::of(o.successes),
            markov_hits: u64::from(self.noise + o.interference[r] > self.interference),
            tail_hits: u64::from(o.direct_gains[r] > self.direct),
        }
    }
}

fn finish(cfg: &NetworkConfig, t: &EventTally) -> Result<(ThroughputEstimate, BoundCheck)> {
    let estimate = t.successes.estimate(cfg.m);
    let trials = t.successes.trials as f64;
    let bounds = BoundCheck {
        markov_event_prob: t.markov_hits as f64 / trials,
        markov_bound: markov_bound(cfg.m, cfg.beta, cfg.noise, cfg.distribution.mean()?),
        tail_event_prob: t.tail_hits as f64 / trials,
        quarter_ratio: estimate.success_rate,
    };
    Ok((estimate, bounds))
}

/// Proof-event frequencies at the weakest active receiver over `outcomes`.
pub fn bound_checks(cfg: &NetworkConfig, outcomes: &[TrialOutcome]) -> Result<BoundCheck> {
    if outcomes.is_empty() {
        return Err(domain("bound checks need at least one outcome"));
    }
    let th = EventThresholds::new(cfg)?;
    let tally = outcomes
        .iter()
        .map(|o| th.tally(o))
        .fold(EventTally::default(), EventTally::merge);
    finish(cfg, &tally).map(|(_, b)| b)
}

/// Throughput and bound checks for one configuration, from a single pass
/// over its trials.
///
/// The bound columns always describe the weakest active pair, whatever the
/// policy.
pub fn evaluate_point(cfg: &NetworkConfig) -> Result<(ThroughputEstimate, BoundCheck)> {
    let th = EventThresholds::new(&NetworkConfig {
        policy: Policy::TopM,
        ..*cfg
    })?;
    let tally = map_reduce_trials(
        cfg,
        |_, o| th.tally(o),
        EventTally::default,
        EventTally::merge,
    )?;
    finish(cfg, &tally)
}

/// One row per grid point, in grid order. Point `k` runs on seed
/// `mix(plan.seed, k)`.
pub fn run_sweep(plan: &SweepPlan) -> std::result::Result<Vec<SweepRow>, SweepFailure> {
    sweep_with(plan, evaluate_point)
}

fn sweep_with<F>(plan: &SweepPlan, eval: F) -> std::result::Result<Vec<SweepRow>, SweepFailure>
where
    F: Fn(&NetworkConfig) -> Result<(ThroughputEstimate, BoundCheck)>,
{
    let fail = |index: usize, partial: Vec<SweepRow>, source: Error| SweepFailure {
        index,
        n: plan.n_grid.get(index).copied().unwrap_or(0),
        partial,
        source,
    };
    if plan.n_grid.is_empty() {
        return Err(fail(0, Vec::new(), domain("sweep grid is empty")));
    }
    if !plan.n_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(fail(
            0,
            Vec::new(),
            domain("sweep grid must be strictly ascending"),
        ));
    }
    let mut rows = Vec::with_capacity(plan.n_grid.len());
    for index in 0..plan.n_grid.len() {
        let point = plan.config_at(index).and_then(|cfg| {
            let (estimate, bounds) = eval(&cfg)?;
            Ok(SweepRow {
                n: cfg.n,
                m: cfg.m,
                estimate,
                bounds,
            })
        });
        match point {
            Ok(row) => rows.push(row),
            Err(e) => return Err(fail(index, rows, e)),
        }
    }
    Ok(rows)
}

/// Empirical overshoot frequency for `m - 1` i.i.d. interferers, next to
/// its Markov bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovCheck {
    pub m: usize,
    pub trials: u64,
    pub event_prob: f64,
    pub bound: f64,
}

impl MarkovCheck {
    /// `bound + 4√(bound / trials)`.
    pub fn slack_limit(&self) -> f64 {
        self.bound + 4.0 * (self.bound / self.trials as f64).sqrt()
    }
}

pub fn markov_check<D: ParentDistribution + ?Sized>(
    d: &D,
    m: usize,
    beta: f64,
    noise: f64,
    trials: u64,
    seed: u64,
) -> Result<MarkovCheck> {
    if m == 0 || trials == 0 {
        return Err(domain("markov check needs m >= 1 and trials >= 1"));
    }
    let mean = d.mean()?;
    let threshold = 2.0 * mean * m as f64;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::substream(seed, t);
            let total: f64 = noise
                + (1..m)
                    .map(|_| d.quantile_unchecked(rand::Rng::random::<f64>(&mut rng)))
                    .sum::<f64>();
            u64::from(total > threshold)
        })
        .sum();
    Ok(MarkovCheck {
        m,
        trials,
        event_prob: hits as f64 / trials as f64,
        bound: markov_bound(m, beta, noise, mean),
    })
}

/// Ordinary least-squares fit of `log(mean_M)` against `log(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub exponent_stderr: f64,
    /// 95% Student-t interval for the exponent.
    pub exponent_ci95: [f64; 2],
    pub points: usize,
}

pub fn fit_exponent(rows: &[(f64, f64)]) -> Result<ScalingFit> {
    if rows.len() < 3 {
        return Err(domain(format!(
            "exponent fit needs at least 3 points, got {}",
            rows.len()
        )));
    }
    if let Some(&(n, y)) = rows.iter().find(|&&(n, y)| !(n > 0.0 && y > 0.0)) {
        return Err(domain(format!(
            "exponent fit needs positive n and mean_M, got ({n}, {y})"
        )));
    }
    let k = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(domain("exponent fit needs at least two distinct n"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let dof = k - 2.0;
    let stderr = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| domain(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(ScalingFit {
        exponent: slope,
        intercept,
        r_squared,
        exponent_stderr: stderr,
        exponent_ci95: [slope - t * stderr, slope + t * stderr],
        points: rows.len(),
    })
}

/// Fit over sweep rows.
pub fn fit_sweep(rows: &[SweepRow]) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.n as f64, r.estimate.mean_m))
        .collect();
    fit_exponent(&pts)
}

/// Reference curve `c · n^(1/3)` for plotting next to sweep results.
pub fn upper_bound_reference(n_grid: &[u64], c: f64) -> Result<Vec<(u64, f64)>> {
    if !(c.is_finite() && c > 0.0) {
        return Err(domain(format!("reference constant must be > 0, got {c}")));
    }
    Ok(n_grid.iter().map(|&n| (n, c * (n as f64).cbrt())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn m_rule_values() {
        assert_eq!(m_rule(1_000_000, 0.1).unwrap(), 25);
        assert_eq!(m_rule(8, 1e-12).unwrap(), 2);
        assert_eq!(m_rule(1_000, 0.1).unwrap(), 5);
        assert!(m_rule(1_000, 0.4).is_err());
        assert!(m_rule(1_000, 1.0 / 3.0).is_err());
        assert!(m_rule(1_000, 0.0).is_err());
        assert!(m_rule(1, 0.1).is_err());
        assert_eq!(m_rule(2, 0.33).unwrap(), 1);
    }

    #[test]
    fn markov_bound_values() {
        assert!((markov_bound(100, 1.0, 1.0, 0.5) - 0.505).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for m in [10, 100, 1_000, 1_000_000] {
            let b = markov_bound(m, 1.0, 1.0, 0.5);
            assert!(b < prev && b > 0.5);
            prev = b;
        }
        assert!((markov_bound(1 << 40, 2.0, 1.0, 0.5) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_power_law() {
        let rows: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6]
            .iter()
            .map(|&n: &f64| (n, 2.0 * n.powf(0.25)))
            .collect();
        let f = fit_exponent(&rows).unwrap();
        assert!((f.exponent - 0.25).abs() < 1e-12);
        assert!((f.intercept - 2f64.ln()).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.exponent_stderr < 1e-10);
    }

    #[test]
    fn fit_flat_data() {
        let f = fit_exponent(&[(10.0, 3.0), (100.0, 3.0), (1000.0, 3.0)]).unwrap();
        assert_eq!(f.exponent, 0.0);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_exponent(&[(10.0, 1.0), (100.0, 2.0)]).is_err());
        assert!(fit_exponent(&[(10.0, 1.0), (100.0, 0.0), (1e3, 2.0)]).is_err());
        assert!(fit_exponent(&[(10.0, 1.0), (10.0, 2.0), (10.0, 3.0)]).is_err());
    }

    #[test]
    fn fit_interval_brackets_estimate() {
        let f = fit_exponent(&[(10.0, 1.0), (100.0, 2.2), (1000.0, 3.9), (1e4, 8.5)]).unwrap();
        assert!(f.exponent_ci95[0] < f.exponent && f.exponent < f.exponent_ci95[1]);
        assert!(f.r_squared > 0.9 && f.r_squared <= 1.0);
    }

    #[test]
    fn reference_curve() {
        let r = upper_bound_reference(&[8, 1_000_000], 1.0).unwrap();
        assert!((r[0].1 - 2.0).abs() < 1e-14);
        assert!((r[1].1 - 100.0).abs() < 1e-12);
        assert!((upper_bound_reference(&[27], 2.0).unwrap()[0].1 - 6.0).abs() < 1e-14);
        assert!(upper_bound_reference(&[27], 0.0).is_err());
    }

    #[test]
    fn sweep_plan_validation() {
        let mut plan = SweepPlan::new(vec![1_000], 0.3);
        plan.delta = 0.1;
        assert!(plan.validate().is_ok());
        assert!(SweepPlan::new(vec![], 0.3).validate().is_err());
        assert!(SweepPlan::new(vec![1_000, 100], 0.3).validate().is_err());
        let mut bad = plan.clone();
        bad.delta = 0.4;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_point_sweep() {
        let mut plan = SweepPlan::new(vec![1_000], 0.3);
        plan.delta = 0.1;
        plan.trials = 200;
        let rows = run_sweep(&plan).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].m, 5);
        assert_eq!(rows[0].estimate.trials, 200);
    }

    #[test]
    fn empty_sweep_is_an_error() {
        let e = run_sweep(&SweepPlan::new(vec![], 0.3)).unwrap_err();
        assert!(e.partial.is_empty());
        assert!(matches!(e.source, Error::Domain(_)));
    }

    #[test]
    fn failing_point_keeps_partial_rows() {
        let mut plan = SweepPlan::new(vec![1_000, 10_000, 100_000], 0.3);
        plan.trials = 50;
        let r = sweep_with(&plan, |cfg| {
            if cfg.n == 100_000 {
                Err(domain("injected"))
            } else {
                evaluate_point(cfg)
            }
        });
        let e = r.unwrap_err();
        assert_eq!((e.index, e.n), (2, 100_000));
        assert_eq!(e.partial.len(), 2);
        assert_eq!(e.partial[1].n, 10_000);
        plan.noise = f64::NAN;
        let e = run_sweep(&plan).unwrap_err();
        assert_eq!(e.index, 0);
        assert!(e.partial.is_empty());
    }

    #[test]
    fn bound_checks_need_top_policy() {
        let plan = SweepPlan::new(vec![1_000], 0.3);
        let mut cfg = plan.config_at(0).unwrap();
        cfg.trials = 10;
        let outcomes = crate::sim::simulate_trials(&cfg).unwrap();
        assert!(bound_checks(&cfg, &outcomes).is_ok());
        assert!(bound_checks(&cfg, &[]).is_err());
        cfg.policy = Policy::RandomM;
        assert!(bound_checks(&cfg, &outcomes).is_err());
    }

    proptest! {
        #[test]
        fn scaling_changes_intercept_only(c in 0.01f64..100.0, p in -1.0f64..1.0) {
            let base: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5]
                .iter()
                .enumerate()
                .map(|(k, &n): (usize, &f64)| (n, n.powf(p) * (1.0 + 0.1 * (k as f64).sin())))
                .collect();
            let scaled: Vec<(f64, f64)> = base.iter().map(|&(n, y)| (n, c * y)).collect();
            let a = fit_exponent(&base).unwrap();
            let b = fit_exponent(&scaled).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
        }

        #[test]
        fn m_rule_is_in_range(n in 2u64..1_000_000_000, delta in 0.001f64..0.333) {
            let m = m_rule(n, delta).unwrap();
            prop_assert!(m >= 1 && m as u64 <= n);
        }
    }
}
