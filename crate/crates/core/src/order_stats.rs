//! Intermediate order statistics.
//!
//! For `n` i.i.d. draws whose law satisfies the von Mises condition, the
//! `i`-th largest value, centred at `a_n = F⁻¹(1 - i/n)` and scaled by
//! `b_n = √i / (n f(a_n))`, tends to a standard normal when `i → ∞` and
//! `i/n → 0`. This module computes `(a_n, b_n)`, samples the top of the
//! ordering in O(m) time, and measures the distance to normality.

use libm::erfc;
use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::ParentDistribution;
use crate::error::{domain, Error, Result};
use crate::seed;

/// The `i`-th largest of `n` draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderStatSpec {
    n: u64,
    i: u64,
}

impl OrderStatSpec {
    pub fn new(n: u64, i: u64) -> Result<Self> {
        if i == 0 || i > n {
            return Err(domain(format!(
                "rank must satisfy 1 <= i <= n, got i={i}, n={n}"
            )));
        }
        Ok(Self { n, i })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn i(&self) -> u64 {
        self.i
    }

    /// `i / n`.
    pub fn fraction(&self) -> f64 {
        self.i as f64 / self.n as f64
    }
}

/// True when the ranks grow while the fractions `i/n` shrink along the
/// sequence, the finite-grid proxy for `i → ∞, i/n → 0`.
pub fn is_intermediate_sequence(specs: &[OrderStatSpec]) -> bool {
    specs.len() >= 2
        && specs
            .windows(2)
            .all(|w| w[1].i > w[0].i && w[1].fraction() < w[0].fraction())
}

/// Centering and scale for an intermediate order statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalkNormalization {
    pub a_n: f64,
    pub b_n: f64,
}

impl FalkNormalization {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.a_n) / self.b_n
    }
}

pub fn falk_constants<D>(d: &D, spec: OrderStatSpec) -> Result<FalkNormalization>
where
    D: ParentDistribution + ?Sized,
{
    if spec.i >= spec.n {
        return Err(domain(format!(
            "Falk constants need i < n, got i={}, n={}",
            spec.i, spec.n
        )));
    }
    // 1 - i/n is formed as an upper-tail probability to keep precision.
    let a_n = d.inverse_survival(spec.fraction());
    let f = d.density(a_n)?;
    if f.is_nan() || f <= 0.0 {
        return Err(Error::DegenerateScale { a_n });
    }
    let b_n = (spec.i as f64).sqrt() / (spec.n as f64 * f);
    Ok(FalkNormalization { a_n, b_n })
}

/// Joint sample of the `m` largest of `n` i.i.d. draws, descending.
///
/// Walks the uniform order statistics downward from the maximum,
/// `U(n) = V₁^(1/n)` and `U(n-k) = U(n-k+1) · V_{k+1}^(1/(n-k))`, in log
/// space as sums of `Exp(1)/(n-k)` terms, and maps each through the law's
/// inverse survival function. Cost is O(m) regardless of `n`.
pub fn sample_top_order_stats<D, R>(d: &D, n: u64, m: usize, rng: &mut R) -> Result<Vec<f64>>
where
    D: ParentDistribution + ?Sized,
    R: Rng + ?Sized,
{
    check_top(n, m)?;
    let mut out = Vec::with_capacity(m);
    let mut log_u = 0.0_f64;
    for k in 0..m as u64 {
        let v: f64 = rng.sample(Open01);
        log_u += v.ln() / (n - k) as f64;
        // 1 - U without cancellation
        let tail = -log_u.exp_m1();
        out.push(d.inverse_survival(tail));
    }
    Ok(out)
}

/// Reference sampler: draws all `n` values, keeps the `m` largest.
///
/// Ties are ordered by draw index. O(n) time and memory.
pub fn sample_top_order_stats_naive<D, R>(d: &D, n: u64, m: usize, rng: &mut R) -> Result<Vec<f64>>
where
    D: ParentDistribution + ?Sized,
    R: Rng + ?Sized,
{
    check_top(n, m)?;
    let draws: Vec<f64> = (0..n)
        .map(|_| d.quantile_unchecked(rng.random::<f64>()))
        .collect();
    Ok(top_m_of(&draws, m))
}

/// The `m` largest entries of `values` in descending order, ties by index.
pub fn top_m_of(values: &[f64], m: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let by_rank = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if m < idx.len() {
        idx.select_nth_unstable_by(m, by_rank);
        idx.truncate(m);
    }
    idx.sort_unstable_by(by_rank);
    idx.into_iter().map(|k| values[k]).collect()
}

fn check_top(n: u64, m: usize) -> Result<()> {
    if m == 0 || m as u64 > n {
        return Err(domain(format!("need 1 <= m <= n, got m={m}, n={n}")));
    }
    Ok(())
}

/// `Φ(x)` through the complementary error function.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov–Smirnov distance to `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(domain("KS statistic of an empty sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0_f64, |acc, (k, &x)| {
        let f = cdf(x);
        let above = (k + 1) as f64 / n - f;
        let below = f - k as f64 / n;
        acc.max(above).max(below)
    }))
}

/// KS distance between the empirical law of `samples` and `N(0, 1)`.
pub fn ks_statistic_vs_normal(samples: &[f64]) -> Result<f64> {
    ks_statistic(samples, standard_normal_cdf)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("two-sample KS needs two nonempty samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    Ok(d)
}

/// Large-sample critical value of the two-sample KS statistic at level
/// `alpha`: `√(-ln(α/2)/2) · √((n₁+n₂)/(n₁n₂))`.
pub fn ks_two_sample_critical(alpha: f64, n1: usize, n2: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (a, b) = (n1 as f64, n2 as f64);
    c * ((a + b) / (a * b)).sqrt()
}

/// Result of [`normality_diagnostic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub spec: OrderStatSpec,
    pub normalization: FalkNormalization,
    pub ks: f64,
    /// `(X - a_n) / b_n` per replicate, in replicate order.
    pub normalized: Vec<f64>,
}

/// Draws `replicates` copies of the `i`-th largest of `n` and reports their
/// Falk-normalised values with the KS distance to `N(0, 1)`.
///
/// Replicate `k` uses the substream `seed::substream(seed, k)`, so the
/// result does not depend on how rayon schedules the work.
pub fn normality_diagnostic<D>(
    d: &D,
    spec: OrderStatSpec,
    replicates: usize,
    seed: u64,
) -> Result<NormalityReport>
where
    D: ParentDistribution + ?Sized,
{
    if replicates == 0 {
        return Err(domain("normality diagnostic needs at least one replicate"));
    }
    let normalization = falk_constants(d, spec)?;
    let rank = spec.i as usize;
    let normalized = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::substream(seed, k);
            let top = sample_top_order_stats(d, spec.n, rank, &mut rng)?;
            Ok(normalization.normalize(top[rank - 1]))
        })
        .collect::<Result<Vec<f64>>>()?;
    let ks = ks_statistic_vs_normal(&normalized)?;
    Ok(NormalityReport {
        spec,
        normalization,
        ks,
        normalized,
    })
}
