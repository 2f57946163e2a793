//! Monte Carlo machinery for one-hop throughput in wireless networks with
//! random connections.
//!
//! Every link between a source and a destination carries an i.i.d. channel
//! power drawn from a [`ParentDistribution`]. In each slot the `m` pairs with
//! the strongest direct links switch on, and a receiver succeeds when its
//! SINR clears the threshold β. The crate provides:
//!
//! * [`dist`]: admissible channel-power laws with exact inverse-transform
//!   sampling and tail diagnostics.
//! * [`order_stats`]: normalisation constants for intermediate order
//!   statistics, an O(m) sampler for the top `m` of `n` draws, and normality
//!   diagnostics.
//! * [`sim`]: single-slot simulation and throughput estimation.
//! * [`scaling`]: sweeps over `n`, exponent fitting and the empirical bound
//!   checks.
//! * [`seed`]: the counter-based seed derivation shared by every parallel
//!   loop.

pub mod dist;
pub mod error;
pub mod order_stats;
pub mod scaling;
pub mod seed;
pub mod sim;

pub use dist::{
    ChannelLaw, ExponentialDistribution, Moments, PaperDistribution, ParentDistribution,
};
pub use error::{Error, Result};
pub use order_stats::{FalkNormalization, OrderStatSpec};
pub use scaling::{BoundCheck, ScalingFit, SweepPlan, SweepRow};
pub use sim::{NetworkConfig, Policy, ThroughputEstimate, TopSampler, TrialOutcome};

/// Version string embedded in every output document.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
