//! Randomized sub-market comparison protocol.
//!
//! From a large universe, each run samples a fixed-size market without
//! replacement, solves both objectives on it, and the run set is summarized
//! as mean percentage deltas of the ESG-weighted result against the plain
//! Sharpe result. Run `k` samples with seed `seed_base + k`, so any single
//! run can be reproduced in isolation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::optimizer::{
    optimize_esg_mv, optimize_mv, MarketInputs, OptimizerError, Portfolio, SolverConfig,
};

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("market size {requested} exceeds the universe of {available}")]
    MarketTooLarge { requested: usize, available: usize },
    #[error("market size must be at least 1")]
    EmptyMarket,
    #[error("experiment needs at least one run")]
    ZeroRuns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub market_size: usize,
    /// Run k samples its market with seed `seed_base + k`.
    pub seed_base: u64,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: 12,
            market_size: 100,
            seed_base: 0,
            solver: SolverConfig::default(),
        }
    }
}

/// Both optimizations for one sampled market. Solver failures are recorded
/// per run rather than aborting the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_index: usize,
    /// Tickers of the sampled market, ascending.
    pub market_symbols: Vec<String>,
    pub mv: Result<Portfolio, OptimizerError>,
    pub esg_mv: Result<Portfolio, OptimizerError>,
}

/// Mean percentage change of each ESG-weighted statistic against its plain
/// counterpart, over runs where both solves succeeded. None when a metric
/// is undefined in any contributing run (zero or non-finite baseline).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaSummary {
    pub sharpe_delta_pct: Option<f64>,
    pub risk_delta_pct: Option<f64>,
    pub return_delta_pct: Option<f64>,
    pub esg_delta_pct: Option<f64>,
    /// Runs where both solves succeeded.
    pub successful_runs: usize,
}

/// Samples `n` distinct tickers without replacement, returned ascending.
pub fn sample_market(
    universe: &[String],
    n: usize,
    seed: u64,
) -> Result<Vec<String>, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::EmptyMarket);
    }
    if n > universe.len() {
        return Err(ExperimentError::MarketTooLarge {
            requested: n,
            available: universe.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..universe.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut picked: Vec<String> = idx[..n].iter().map(|&i| universe[i].clone()).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Solves both objectives on one already-sampled market.
pub fn run_single_market(
    universe: &MarketInputs,
    symbols: &[String],
    solver: &SolverConfig,
    run_index: usize,
) -> RunRecord {
    match universe.subset(symbols) {
        Ok(sub) => RunRecord {
            run_index,
            market_symbols: symbols.to_vec(),
            mv: optimize_mv(&sub, solver),
            esg_mv: optimize_esg_mv(&sub, solver),
        },
        Err(e) => RunRecord {
            run_index,
            market_symbols: symbols.to_vec(),
            mv: Err(e.clone()),
            esg_mv: Err(e),
        },
    }
}

/// Runs the full protocol. Records come back ordered by run index and are
/// identical whether runs execute serially or in parallel.
pub fn run_experiment(
    universe: &MarketInputs,
    cfg: &ExperimentConfig,
) -> Result<Vec<RunRecord>, ExperimentError> {
    if cfg.runs == 0 {
        return Err(ExperimentError::ZeroRuns);
    }
    let markets: Vec<Vec<String>> = (0..cfg.runs)
        .map(|k| sample_market(universe.symbols(), cfg.market_size, cfg.seed_base + k as u64))
        .collect::<Result<_, _>>()?;
    Ok(markets
        .par_iter()
        .enumerate()
        .map(|(k, symbols)| run_single_market(universe, symbols, &cfg.solver, k))
        .collect())
}

fn pct_delta(base: f64, new: f64) -> Option<f64> {
    if base == 0.0 || !base.is_finite() || !new.is_finite() {
        return None;
    }
    Some(100.0 * (new - base) / base)
}

/// Averages the per-run percentage deltas. A metric goes undefined (None)
/// if any successful run cannot express it as a percentage of its baseline.
pub fn aggregate_deltas(records: &[RunRecord]) -> DeltaSummary {
    let pairs: Vec<(&Portfolio, &Portfolio)> = records
        .iter()
        .filter_map(|r| match (&r.mv, &r.esg_mv) {
            (Ok(m), Ok(e)) => Some((m, e)),
            _ => None,
        })
        .collect();
    let successful_runs = pairs.len();
    if successful_runs == 0 {
        return DeltaSummary::default();
    }

    let mean_of = |deltas: Vec<Option<f64>>| -> Option<f64> {
        let mut sum = 0.0;
        for d in &deltas {
            sum += (*d)?;
        }
        Some(sum / deltas.len() as f64)
    };

    let sharpe = mean_of(
        pairs
            .iter()
            .map(|(m, e)| pct_delta(m.sharpe?, e.sharpe?))
            .collect(),
    );
    let risk = mean_of(
        pairs
            .iter()
            .map(|(m, e)| pct_delta(m.risk_annual, e.risk_annual))
            .collect(),
    );
    let ret = mean_of(
        pairs
            .iter()
            .map(|(m, e)| pct_delta(m.return_annual, e.return_annual))
            .collect(),
    );
    let esg = mean_of(
        pairs
            .iter()
            .map(|(m, e)| pct_delta(m.esg_mean, e.esg_mean))
            .collect(),
    );
    DeltaSummary {
        sharpe_delta_pct: sharpe,
        risk_delta_pct: risk,
        return_delta_pct: ret,
        esg_delta_pct: esg,
        successful_runs,
    }
}
