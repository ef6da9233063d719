//! Long-only portfolio construction on annualized return moments.
//!
//! Two objectives are supported, both maximized over the simplex with a
//! multistart projected-gradient solver:
//!
//! * plain Sharpe ratio, `(mu'w - rf) / sqrt(w'Cw)`;
//! * ESG-weighted Sharpe, the Sharpe ratio times the portfolio's mean ESG
//!   score `e'w`, which trades risk-adjusted return against sustainability
//!   in a single number.
//!
//! Daily moments are annualized with the 252 trading day convention: means
//! scale by 252, covariances by 252, volatilities by sqrt(252).

mod solver;

pub use solver::project_to_simplex;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg;
use crate::market_data::{EsgTable, ReturnsPanel};
use crate::rng::mix_seed;
use solver::{maximize_on_simplex, AscentOutcome};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("market holds no assets")]
    Empty,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("ESG score outside [0, 10] for {ticker}: {score}")]
    ScoreOutOfRange { ticker: String, score: f64 },
    #[error("no ESG score for `{0}`")]
    MissingEsg(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("covariance matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("weights are not on the long-only simplex: {0}")]
    NotOnSimplex(String),
    #[error("every asset has zero risk and zero return; nothing to optimize")]
    DegenerateMarket,
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
}

/// Validated annualized inputs for one optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInputs {
    symbols: Vec<String>,
    mu_annual: Array1<f64>,
    cov_annual: Array2<f64>,
    esg: Array1<f64>,
    risk_free: f64,
}

impl MarketInputs {
    /// Checks shapes, finiteness, the ESG range, and that the covariance is
    /// symmetric and positive semidefinite to tolerance before accepting.
    pub fn new(
        symbols: Vec<String>,
        mu_annual: Array1<f64>,
        cov_annual: Array2<f64>,
        esg: Array1<f64>,
        risk_free: f64,
    ) -> Result<Self, OptimizerError> {
        let n = symbols.len();
        if n == 0 {
            return Err(OptimizerError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(OptimizerError::DuplicateSymbol(s.clone()));
            }
        }
        if mu_annual.len() != n {
            return Err(OptimizerError::DimensionMismatch(format!(
                "{n} symbols but {} expected returns",
                mu_annual.len()
            )));
        }
        if esg.len() != n {
            return Err(OptimizerError::DimensionMismatch(format!(
                "{n} symbols but {} ESG scores",
                esg.len()
            )));
        }
        if cov_annual.nrows() != n || cov_annual.ncols() != n {
            return Err(OptimizerError::DimensionMismatch(format!(
                "{n} symbols but covariance is {}x{}",
                cov_annual.nrows(),
                cov_annual.ncols()
            )));
        }
        if mu_annual.iter().any(|v| !v.is_finite()) {
            return Err(OptimizerError::NonFinite("expected returns"));
        }
        if cov_annual.iter().any(|v| !v.is_finite()) {
            return Err(OptimizerError::NonFinite("covariance"));
        }
        if !risk_free.is_finite() {
            return Err(OptimizerError::NonFinite("risk-free rate"));
        }
        for (i, &score) in esg.iter().enumerate() {
            if !score.is_finite() || !(0.0..=10.0).contains(&score) {
                return Err(OptimizerError::ScoreOutOfRange {
                    ticker: symbols[i].clone(),
                    score,
                });
            }
        }
        let scale = cov_annual
            .iter()
            .fold(1.0f64, |acc, &v| acc.max(v.abs()));
        if linalg::max_asymmetry(&cov_annual) > 1e-10 * scale {
            return Err(OptimizerError::NotSymmetric);
        }
        if !linalg::is_psd_within(&cov_annual, 1e-10 * scale) {
            return Err(OptimizerError::NotPositiveSemidefinite);
        }
        Ok(Self {
            symbols,
            mu_annual,
            cov_annual,
            esg,
            risk_free,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn mu_annual(&self) -> &Array1<f64> {
        &self.mu_annual
    }

    pub fn cov_annual(&self) -> &Array2<f64> {
        &self.cov_annual
    }

    pub fn esg(&self) -> &Array1<f64> {
        &self.esg
    }

    pub fn risk_free(&self) -> f64 {
        self.risk_free
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The sub-market holding `tickers`, in the order given.
    pub fn subset(&self, tickers: &[String]) -> Result<Self, OptimizerError> {
        let mut idx = Vec::with_capacity(tickers.len());
        for t in tickers {
            idx.push(
                self.symbols
                    .iter()
                    .position(|s| s == t)
                    .ok_or_else(|| OptimizerError::UnknownSymbol(t.clone()))?,
            );
        }
        let k = idx.len();
        let mu = Array1::from_shape_fn(k, |i| self.mu_annual[idx[i]]);
        let esg = Array1::from_shape_fn(k, |i| self.esg[idx[i]]);
        let cov = Array2::from_shape_fn((k, k), |(i, j)| self.cov_annual[[idx[i], idx[j]]]);
        Self::new(tickers.to_vec(), mu, cov, esg, self.risk_free)
    }
}

/// Annualizes a daily returns panel and pairs it with ESG scores.
pub fn annualize(
    panel: &ReturnsPanel,
    esg: &EsgTable,
    risk_free: f64,
) -> Result<MarketInputs, OptimizerError> {
    let mut scores = Array1::zeros(panel.symbols.len());
    for (i, s) in panel.symbols.iter().enumerate() {
        scores[i] = esg
            .get(s)
            .ok_or_else(|| OptimizerError::MissingEsg(s.clone()))?;
    }
    MarketInputs::new(
        panel.symbols.clone(),
        &panel.mean_daily * TRADING_DAYS_PER_YEAR,
        &panel.cov_daily * TRADING_DAYS_PER_YEAR,
        scores,
        risk_free,
    )
}

/// An allocation with its headline statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    pub return_annual: f64,
    pub risk_annual: f64,
    /// None when both the risk and the excess return are zero; infinite
    /// when the risk alone is zero.
    pub sharpe: Option<f64>,
    pub esg_mean: f64,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// True when no allocation with a strictly positive Sharpe ratio was
    /// found; ratio-based comparisons are then meaningless.
    pub non_positive_sharpe: bool,
}

/// Multistart solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative objective improvement treated as converged.
    pub tolerance: f64,
    /// Number of starts: equal weights plus `multistarts - 1` random
    /// simplex points.
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-9,
            multistarts: 8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.max_iterations == 0 {
            return Err(OptimizerError::BadConfig("max_iterations must be >= 1".into()));
        }
        if self.multistarts == 0 {
            return Err(OptimizerError::BadConfig("multistarts must be >= 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(OptimizerError::BadConfig(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// The two supported objectives, with closed-form gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Sharpe,
    EsgWeightedSharpe,
}

impl Objective {
    /// Objective value at any weight vector (not necessarily feasible).
    pub fn value(self, w: &Array1<f64>, m: &MarketInputs) -> f64 {
        let excess = m.mu_annual.dot(w) - m.risk_free;
        let var = w.dot(&m.cov_annual.dot(w)).max(0.0);
        let sigma = var.sqrt();
        let sharpe = if sigma > 0.0 {
            excess / sigma
        } else if excess == 0.0 {
            0.0
        } else {
            f64::INFINITY * excess.signum()
        };
        match self {
            Objective::Sharpe => sharpe,
            Objective::EsgWeightedSharpe => m.esg.dot(w) * sharpe,
        }
    }

    /// Analytic gradient. With S = (mu'w - rf)/sigma and sigma = sqrt(w'Cw):
    /// dS/dw = mu/sigma - (mu'w - rf) Cw / sigma^3, and for the weighted
    /// objective E*S with E = e'w: d(ES)/dw = S e + E dS/dw. Returns zeros
    /// at sigma = 0, where the ratio has no gradient.
    pub fn gradient(self, w: &Array1<f64>, m: &MarketInputs) -> Array1<f64> {
        let cw = m.cov_annual.dot(w);
        let var = w.dot(&cw).max(0.0);
        let sigma = var.sqrt();
        if sigma == 0.0 {
            return Array1::zeros(w.len());
        }
        let excess = m.mu_annual.dot(w) - m.risk_free;
        let grad_sharpe = &m.mu_annual / sigma - &cw * (excess / (sigma * var));
        match self {
            Objective::Sharpe => grad_sharpe,
            Objective::EsgWeightedSharpe => {
                let sharpe = excess / sigma;
                let esg_mean = m.esg.dot(w);
                &m.esg * sharpe + &grad_sharpe * esg_mean
            }
        }
    }
}

/// Statistics for a given allocation. Weights must already lie on the
/// simplex to tolerance; they are clamped into [0, 1] on output.
pub fn portfolio_stats(weights: &[f64], market: &MarketInputs) -> Result<Portfolio, OptimizerError> {
    let n = market.len();
    if weights.len() != n {
        return Err(OptimizerError::DimensionMismatch(format!(
            "{n} assets but {} weights",
            weights.len()
        )));
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(OptimizerError::NonFinite("weights"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(OptimizerError::NotOnSimplex(format!(
            "weights sum to {sum}"
        )));
    }
    if let Some(w) = weights.iter().find(|&&w| !(-1e-10..=1.0 + 1e-10).contains(&w)) {
        return Err(OptimizerError::NotOnSimplex(format!(
            "weight {w} outside [0, 1]"
        )));
    }
    let w = Array1::from_iter(weights.iter().map(|&x| x.clamp(0.0, 1.0)));
    let return_annual = market.mu_annual.dot(&w);
    let var = w.dot(&market.cov_annual.dot(&w)).max(0.0);
    let risk_annual = var.sqrt();
    let excess = return_annual - market.risk_free;
    let sharpe = if risk_annual > 0.0 {
        Some(excess / risk_annual)
    } else if excess == 0.0 {
        None
    } else {
        Some(f64::INFINITY * excess.signum())
    };
    let esg_mean = market.esg.dot(&w);
    Ok(Portfolio {
        weights: w.to_vec(),
        return_annual,
        risk_annual,
        sharpe,
        esg_mean,
        objective_value: sharpe.unwrap_or(f64::NAN),
        converged: true,
        iterations: 0,
        non_positive_sharpe: !matches!(sharpe, Some(s) if s > 0.0),
    })
}

/// Maximum-Sharpe allocation.
pub fn optimize_mv(market: &MarketInputs, cfg: &SolverConfig) -> Result<Portfolio, OptimizerError> {
    optimize(market, cfg, Objective::Sharpe)
}

/// Maximum ESG-weighted-Sharpe allocation.
pub fn optimize_esg_mv(
    market: &MarketInputs,
    cfg: &SolverConfig,
) -> Result<Portfolio, OptimizerError> {
    optimize(market, cfg, Objective::EsgWeightedSharpe)
}

/// Shared multistart driver. Exposed so either objective can be run
/// through one entry point.
pub fn optimize(
    market: &MarketInputs,
    cfg: &SolverConfig,
    objective: Objective,
) -> Result<Portfolio, OptimizerError> {
    cfg.validate()?;
    if market.mu_annual.iter().all(|&m| m == 0.0)
        && market.cov_annual.iter().all(|&c| c == 0.0)
    {
        return Err(OptimizerError::DegenerateMarket);
    }
    let n = market.len();
    if n == 1 {
        let mut p = portfolio_stats(&[1.0], market)?;
        p.objective_value = objective.value(&Array1::ones(1), market);
        return Ok(p);
    }

    let starts = starting_points(n, cfg);
    let outcomes: Vec<AscentOutcome> = starts
        .par_iter()
        .map(|s| {
            maximize_on_simplex(
                s,
                |w| objective.value(w, market),
                |w| objective.gradient(w, market),
                cfg.max_iterations,
                cfg.tolerance,
            )
        })
        .collect();

    let mut best: Option<(AscentOutcome, f64)> = None;
    for o in outcomes {
        let var = o.x.dot(&market.cov_annual.dot(&o.x)).max(0.0);
        let risk = var.sqrt();
        best = Some(match best {
            None => (o, risk),
            Some((inc, inc_risk)) => {
                if prefer(&o, risk, &inc, inc_risk) {
                    (o, risk)
                } else {
                    (inc, inc_risk)
                }
            }
        });
    }
    let (chosen, _) = best.expect("at least one start");
    let w: Vec<f64> = chosen.x.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    let mut p = portfolio_stats(&w, market)?;
    p.objective_value = objective.value(&Array1::from_vec(w), market);
    p.converged = chosen.converged;
    p.iterations = chosen.iterations;
    Ok(p)
}

/// Deterministic tie-break: higher objective, then lower risk, then
/// lexicographically smallest weight vector.
fn prefer(cand: &AscentOutcome, cand_risk: f64, inc: &AscentOutcome, inc_risk: f64) -> bool {
    let co = if cand.objective.is_nan() {
        f64::NEG_INFINITY
    } else {
        cand.objective
    };
    let io = if inc.objective.is_nan() {
        f64::NEG_INFINITY
    } else {
        inc.objective
    };
    if co != io {
        return co > io;
    }
    if cand_risk != inc_risk {
        return cand_risk < inc_risk;
    }
    for (a, b) in cand.x.iter().zip(inc.x.iter()) {
        match a.total_cmp(b) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Equal weights first, then flat-Dirichlet draws, one generator per start
/// so the set is independent of evaluation order.
fn starting_points(n: usize, cfg: &SolverConfig) -> Vec<Array1<f64>> {
    let mut starts = Vec::with_capacity(cfg.multistarts);
    starts.push(Array1::from_elem(n, 1.0 / n as f64));
    for k in 1..cfg.multistarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, k as u64));
        let mut g: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                -(1.0 - u).ln()
            })
            .collect();
        let sum: f64 = g.iter().sum();
        if sum > 0.0 {
            for v in &mut g {
                *v /= sum;
            }
        } else {
            g = vec![1.0 / n as f64; n];
        }
        starts.push(Array1::from_vec(g));
    }
    starts
}
