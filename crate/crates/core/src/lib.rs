//! Portfolio construction toolkit for ETF universes.
//!
//! The pipeline runs in four stages, each usable on its own:
//!
//! 1. [`market_data`] loads adjusted-close and ESG CSVs, applies the study
//!    window, coverage filter and fill policy, and computes daily return
//!    moments.
//! 2. [`forecast`] fits bagged regression trees on lagged closes and rolls
//!    them forward to extend each series past its last observation.
//! 3. [`metrics`] scores forecasts with scaled errors (MASE, RMSSE) against
//!    a repeat-yesterday baseline.
//! 4. [`optimizer`] maximizes the Sharpe ratio or the ESG-weighted Sharpe
//!    ratio over the long-only simplex; [`experiment`] repeats that
//!    comparison over many randomly sampled sub-markets.
//!
//! Every randomized step is seeded and parallel execution is bit-for-bit
//! identical to serial execution. [`synthetic`] generates deterministic
//! markets for tests and demos.

pub mod experiment;
pub mod forecast;
pub mod market_data;
pub mod metrics;
pub mod optimizer;
pub mod synthetic;

mod linalg;
mod rng;
