//! Simulation and verification toolkit for a market whose risky asset is
//! driven by fractional Brownian motion with stochastic volatility.
//!
//! The crate samples the modulator exactly, evaluates pathwise left-point
//! Stieltjes sums, builds asset prices from their exponential form and
//! evaluates the explicit zero-capital portfolio whose value is a perfect
//! square. The [`experiment`] module wraps everything in a seeded,
//! parallel, reproducible harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod experiment;
pub mod fbm;
pub mod market;
pub mod path;
pub mod seeding;
pub mod stats;
pub mod strategy;
pub mod volatility;

pub use calculus::{ConvergenceReport, ItoField, ModulatorFunction, ScalarField};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, RunReport};
pub use fbm::{CirParams, FbmSampler, FbmSpec, TimeChange};
pub use market::{MarketParams, MarketPaths};
pub use path::{Partition, SamplePath};
pub use seeding::{path_seed, Component};
pub use strategy::{
    ArbitrageCertificate, CertificateStatus, Holdings, PortfolioTrajectory, StrategyParams,
};
pub use volatility::{PhiFunction, VolPath, VolatilityModelSpec};

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
