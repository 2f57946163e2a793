//! Channel-power parent distributions.
//!
//! Every member of the admissible class has a finite mean and variance.
//! Sampling is by inverse transform only, so a sample is a deterministic
//! function of the uniform stream that produced it.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Mean and variance of a parent law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// A law for the channel power `γ = |h|²` on `[0, ∞)`.
///
/// Implementors supply the density, the distribution function and the exact
/// moments. Quantiles fall back to bisection on [`cumulative`] when no closed
/// form is available.
///
/// [`cumulative`]: ParentDistribution::cumulative
pub trait ParentDistribution: fmt::Debug + Send + Sync {
    /// Density without argument checks; zero below the support.
    fn pdf(&self, x: f64) -> f64;

    /// `F(x)`. Zero at and below the lower edge of the support.
    fn cumulative(&self, x: f64) -> f64;

    /// Exact mean and variance.
    fn moments(&self) -> Result<Moments>;

    /// `1 - F(x)`. Override when the tail can be evaluated without
    /// cancellation.
    fn survival(&self, x: f64) -> f64 {
        1.0 - self.cumulative(x)
    }

    /// Density at `x`, rejecting non-finite arguments.
    fn density(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(domain(format!("density argument must be finite, got {x}")));
        }
        Ok(self.pdf(x))
    }

    /// Smallest `x` with `F(x) >= u`, for `u` in `[0, 1)`.
    fn quantile(&self, u: f64) -> Result<f64> {
        check_probability(u)?;
        Ok(self.quantile_unchecked(u))
    }

    /// [`quantile`](ParentDistribution::quantile) without the range check.
    fn quantile_unchecked(&self, u: f64) -> f64 {
        bisect_quantile(self, u)
    }

    /// Point whose upper-tail probability is `q`, for `q` in `(0, 1]`.
    ///
    /// Equivalent to `quantile(1 - q)`, but laws with a closed form evaluate
    /// it without forming `1 - q`, which matters deep in the tail.
    fn inverse_survival(&self, q: f64) -> f64 {
        self.quantile_unchecked(1.0 - q)
    }

    fn mean(&self) -> Result<f64> {
        self.moments().map(|m| m.mean)
    }

    fn variance(&self) -> Result<f64> {
        self.moments().map(|m| m.variance)
    }

    /// `x f(x) / (1 - F(x))`, whose limit at infinity is the von Mises index.
    fn von_mises_ratio(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(domain(format!(
                "von Mises ratio needs finite x > 0, got {x}"
            )));
        }
        let tail = self.survival(x);
        if tail <= 0.0 {
            return Err(Error::DivisionDegenerate { x });
        }
        Ok(x * self.pdf(x) / tail)
    }

    /// One inverse-transform draw, `quantile(U)` with `U` uniform on `[0, 1)`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64
    where
        Self: Sized,
    {
        self.quantile_unchecked(rng.random::<f64>())
    }
}

fn check_probability(u: f64) -> Result<()> {
    if (0.0..1.0).contains(&u) {
        Ok(())
    } else {
        Err(domain(format!(
            "quantile level must lie in [0, 1), got {u}"
        )))
    }
}

/// Tolerance in probability space for the generic quantile search.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

/// Generic quantile by bracketing and bisection on `F`.
///
/// Assumes the support starts at zero. Stops once `|F(x) - u|` is within
/// [`BISECTION_TOLERANCE`] or the bracket can no longer be split.
pub fn bisect_quantile<D: ParentDistribution + ?Sized>(d: &D, u: f64) -> f64 {
    if u <= d.cumulative(0.0) {
        return 0.0;
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while d.cumulative(hi) < u {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        let f = d.cumulative(mid);
        if (f - u).abs() <= BISECTION_TOLERANCE {
            return mid;
        }
        if f < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `count` i.i.d. inverse-transform draws from `d`.
pub fn sample_iid<D, R>(d: &D, count: usize, rng: &mut R) -> Result<Vec<f64>>
where
    D: ParentDistribution,
    R: Rng + ?Sized,
{
    if count == 0 {
        return Err(domain("sample count must be at least 1"));
    }
    Ok((0..count).map(|_| d.sample(rng)).collect())
}

/// Lomax-type law with density `(2+ε)(1+x)^-(3+ε)` on `x >= 0`.
///
/// `1 + X` is Pareto with unit scale and tail index `α = 2 + ε`, so the mean
/// is `1/(1+ε)` and the variance `(2+ε) / ((1+ε)² ε)`, finite for any ε > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperDistribution {
    epsilon: f64,
}

impl PaperDistribution {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(domain(format!(
                "epsilon must be finite and strictly positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Tail index `α = 2 + ε`, also the von Mises limit.
    pub fn tail_index(&self) -> f64 {
        2.0 + self.epsilon
    }
}

impl ParentDistribution for PaperDistribution {
    fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let a = self.tail_index();
        a * (-(a + 1.0) * x.ln_1p()).exp()
    }

    fn cumulative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        -(-self.tail_index() * x.ln_1p()).exp_m1()
    }

    fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        (-self.tail_index() * x.ln_1p()).exp()
    }

    fn moments(&self) -> Result<Moments> {
        let e = self.epsilon;
        Ok(Moments {
            mean: 1.0 / (1.0 + e),
            variance: (2.0 + e) / ((1.0 + e) * (1.0 + e) * e),
        })
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        // (1-u)^(-1/α) - 1
        (-(-u).ln_1p() / self.tail_index()).exp_m1()
    }

    fn inverse_survival(&self, q: f64) -> f64 {
        (-q.ln() / self.tail_index()).exp_m1()
    }

    fn von_mises_ratio(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(domain(format!(
                "von Mises ratio needs finite x > 0, got {x}"
            )));
        }
        Ok(self.tail_index() * x / (1.0 + x))
    }
}

/// Exponential law with the given rate; the light-tailed comparison member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialDistribution {
    rate: f64,
}

impl ExponentialDistribution {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(domain(format!(
                "rate must be finite and strictly positive, got {rate}"
            )));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl ParentDistribution for ExponentialDistribution {
    fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * x).exp()
        }
    }

    fn cumulative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }

    fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (-self.rate * x).exp()
        }
    }

    fn moments(&self) -> Result<Moments> {
        Ok(Moments {
            mean: 1.0 / self.rate,
            variance: 1.0 / (self.rate * self.rate),
        })
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        -(-u).ln_1p() / self.rate
    }

    fn inverse_survival(&self, q: f64) -> f64 {
        -q.ln() / self.rate
    }
}

/// The configurable members of the admissible class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum ChannelLaw {
    Paper(PaperDistribution),
    Exponential(ExponentialDistribution),
}

impl ChannelLaw {
    pub fn paper(epsilon: f64) -> Result<Self> {
        PaperDistribution::new(epsilon).map(Self::Paper)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        ExponentialDistribution::new(rate).map(Self::Exponential)
    }
}

macro_rules! delegate {
    ($self:ident, $d:ident => $e:expr) => {
        match $self {
            ChannelLaw::Paper($d) => $e,
            ChannelLaw::Exponential($d) => $e,
        }
    };
}

impl ParentDistribution for ChannelLaw {
    fn pdf(&self, x: f64) -> f64 {
        delegate!(self, d => d.pdf(x))
    }
    fn cumulative(&self, x: f64) -> f64 {
        delegate!(self, d => d.cumulative(x))
    }
    fn moments(&self) -> Result<Moments> {
        delegate!(self, d => d.moments())
    }
    fn survival(&self, x: f64) -> f64 {
        delegate!(self, d => d.survival(x))
    }
    fn quantile_unchecked(&self, u: f64) -> f64 {
        delegate!(self, d => d.quantile_unchecked(u))
    }
    fn inverse_survival(&self, q: f64) -> f64 {
        delegate!(self, d => d.inverse_survival(q))
    }
    fn von_mises_ratio(&self, x: f64) -> Result<f64> {
        delegate!(self, d => d.von_mises_ratio(x))
    }
}
