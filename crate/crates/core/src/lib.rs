//! Mean-variance and monotone mean-variance portfolio selection in a
//! jump-diffusion market: preference constants, feedback strategies, path
//! simulation, Monte Carlo statistics and the multi-asset extension.

// `!(x > 0.0)` is how parameter checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod market;
pub mod montecarlo;
pub mod multi;
pub mod preferences;
pub mod scenarios;
pub mod simulate;
pub mod strategy;

pub use error::{Error, Result};
pub use market::{InvestorParams, JumpDistribution, JumpSpec, MarketParams};
pub use montecarlo::{ExperimentResult, HistogramBin, MCConfig, TerminalStats};
pub use multi::{CapmReport, MultiMarket, MultiSolved};
pub use preferences::{SolvedPreferences, DEFAULT_TOL};
pub use scenarios::Scenario;
pub use simulate::{MarketPath, PathDump, TimeGrid, WealthPath};
pub use strategy::{StrategyKind, TargetCurve};
