//! Price forecasting with bagged regression trees on lagged features.
//!
//! A series of adjusted closes is turned into a supervised table whose row
//! `t` holds the previous `lags` values and whose target is the close at
//! `t`. Each tree trains on a bootstrap resample with a random feature
//! subset per split; the ensemble mean is the point forecast and the spread
//! across trees gives an interval. Multi-step forecasts are produced
//! recursively, feeding each prediction back into the lag window.
//!
//! Everything here is deterministic for a fixed seed: per-tree generators
//! are derived from the seed and the tree index, so a parallel fit equals a
//! serial one.

mod tree;

pub use tree::RegressionTree;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::market_data::{next_trading_days, MarketDataError, PriceTable};
use crate::rng::{mix_seed, ticker_stream};
use tree::GrowParams;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("series too short: need at least {need} points, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("lag count must be at least 1")]
    ZeroLags,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("forest needs at least one tree")]
    ZeroTrees,
    #[error("feature fraction must lie in (0, 1], got {0}")]
    BadFeatureFraction(f64),
    #[error("min_leaf must be at least 1")]
    ZeroMinLeaf,
    #[error("need at least {need} supervised rows for min_leaf {min_leaf}, got {got}")]
    TooFewRows {
        need: usize,
        got: usize,
        min_leaf: usize,
    },
    #[error("features and targets disagree: {rows} rows vs {targets} targets")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("series shorter than the lag window: need {need}, got {got}")]
    LagWindowUnavailable { need: usize, got: usize },
    #[error("no series could be extended; first failure: {0}")]
    NothingExtended(String),
    #[error(transparent)]
    Market(#[from] MarketDataError),
}

/// Shape of the supervised problem: how many past closes feed each
/// prediction and how many business days to roll forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagConfig {
    pub lags: usize,
    pub horizon: usize,
}

impl Default for LagConfig {
    fn default() -> Self {
        // Two trading months of forecast from one month of context.
        Self {
            lags: 20,
            horizon: 42,
        }
    }
}

impl LagConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.lags == 0 {
            return Err(ForecastError::ZeroLags);
        }
        if self.horizon == 0 {
            return Err(ForecastError::ZeroHorizon);
        }
        Ok(())
    }
}

/// Ensemble hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// None grows until the min_leaf rule stops splitting.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of features examined per split, in (0, 1].
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 10_000,
            max_depth: None,
            min_leaf: 2,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.n_trees == 0 {
            return Err(ForecastError::ZeroTrees);
        }
        if self.min_leaf == 0 {
            return Err(ForecastError::ZeroMinLeaf);
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(ForecastError::BadFeatureFraction(self.feature_fraction));
        }
        Ok(())
    }

    fn resolved_k(&self, n_features: usize) -> usize {
        ((self.feature_fraction * n_features as f64).ceil() as usize).clamp(1, n_features)
    }
}

/// A fitted ensemble plus everything needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    trees: Vec<RegressionTree>,
    lag_config: LagConfig,
    forest_config: ForestConfig,
    train_target_range: (f64, f64),
}

/// Recursive multi-step forecast with ensemble spread per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub point_forecast: Vec<f64>,
    /// 2.5th percentile across trees, never above the point forecast.
    pub interval_low: Vec<f64>,
    /// 97.5th percentile across trees, never below the point forecast.
    pub interval_high: Vec<f64>,
    /// (min, max) tree prediction per step.
    pub per_step_tree_spread: Vec<(f64, f64)>,
}

/// Chronological 80/20 split, training first. The cut index is
/// ceil(0.8 * len) computed in integer arithmetic.
pub fn split_train_test(series: &[f64]) -> Result<(&[f64], &[f64]), ForecastError> {
    if series.len() < 10 {
        return Err(ForecastError::SeriesTooShort {
            need: 10,
            got: series.len(),
        });
    }
    let cut = (4 * series.len()).div_ceil(5);
    Ok(series.split_at(cut))
}

/// Builds the lagged design matrix. Row r holds series[r..r+lags] and its
/// target is series[r+lags], giving len - lags rows.
pub fn make_supervised(
    series: &[f64],
    lag: &LagConfig,
) -> Result<(Array2<f64>, Vec<f64>), ForecastError> {
    lag.validate()?;
    if series.len() <= lag.lags {
        return Err(ForecastError::SeriesTooShort {
            need: lag.lags + 1,
            got: series.len(),
        });
    }
    let rows = series.len() - lag.lags;
    let features = Array2::from_shape_fn((rows, lag.lags), |(r, j)| series[r + j]);
    let targets = series[lag.lags..].to_vec();
    Ok((features, targets))
}

/// Seed for one symbol's forest, derived from the base seed and the ticker
/// name so it stays stable when the rest of the universe changes.
pub fn symbol_seed(base: u64, ticker: &str) -> u64 {
    mix_seed(base, ticker_stream(ticker))
}

/// The bootstrap resample used for one tree. Exposed so the resampling
/// contract is testable: tree `i` draws exactly these rows, in this order,
/// before consuming any split randomness.
pub fn bootstrap_indices(seed: u64, tree_index: u64, n_rows: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, tree_index));
    draw_bootstrap(&mut rng, n_rows)
}

fn draw_bootstrap(rng: &mut ChaCha8Rng, n_rows: usize) -> Vec<usize> {
    (0..n_rows).map(|_| rng.random_range(0..n_rows)).collect()
}

/// Fits the ensemble. Trees are grown in parallel; results are identical to
/// a serial fit because every tree seeds its own generator.
pub fn fit_forest(
    features: &Array2<f64>,
    targets: &[f64],
    lag: &LagConfig,
    cfg: &ForestConfig,
) -> Result<ForecastModel, ForecastError> {
    lag.validate()?;
    cfg.validate()?;
    let n = features.nrows();
    if n != targets.len() {
        return Err(ForecastError::ShapeMismatch {
            rows: n,
            targets: targets.len(),
        });
    }
    if n < 2 * cfg.min_leaf {
        return Err(ForecastError::TooFewRows {
            need: 2 * cfg.min_leaf,
            got: n,
            min_leaf: cfg.min_leaf,
        });
    }
    if features.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite);
    }
    let params = GrowParams {
        min_leaf: cfg.min_leaf,
        max_depth: cfg.max_depth,
        k_features: cfg.resolved_k(features.ncols()),
    };
    let trees: Vec<RegressionTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, i as u64));
            let sample = if cfg.bootstrap {
                draw_bootstrap(&mut rng, n)
            } else {
                (0..n).collect()
            };
            tree::grow_tree(features, targets, sample, &params, &mut rng)
        })
        .collect();
    let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ForecastModel {
        trees,
        lag_config: *lag,
        forest_config: *cfg,
        train_target_range: (lo, hi),
    })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ForecastModel {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn lag_config(&self) -> &LagConfig {
        &self.lag_config
    }

    pub fn forest_config(&self) -> &ForestConfig {
        &self.forest_config
    }

    /// (min, max) target seen in training; every prediction lies inside.
    pub fn train_target_range(&self) -> (f64, f64) {
        self.train_target_range
    }

    /// Ensemble mean for one lag window.
    pub fn predict_row(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        sum / self.trees.len() as f64
    }

    /// Ensemble mean for each row of a design matrix.
    pub fn predict_rows(&self, features: &Array2<f64>) -> Vec<f64> {
        features
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|row| self.predict_row(row.as_slice().expect("row-major design matrix")))
            .collect()
    }

    /// One-step-ahead predictions over the test window, always conditioning
    /// on observed values (errors do not compound).
    pub fn predict_test(&self, train: &[f64], test: &[f64]) -> Result<Vec<f64>, ForecastError> {
        let lags = self.lag_config.lags;
        if train.len() < lags {
            return Err(ForecastError::LagWindowUnavailable {
                need: lags,
                got: train.len(),
            });
        }
        let mut full = Vec::with_capacity(train.len() + test.len());
        full.extend_from_slice(train);
        full.extend_from_slice(test);
        let mut out = Vec::with_capacity(test.len());
        for j in 0..test.len() {
            let end = train.len() + j;
            out.push(self.predict_row(&full[end - lags..end]));
        }
        Ok(out)
    }

    /// Rolls the model forward `horizon` steps past the end of `series`,
    /// feeding point forecasts back into the lag window.
    pub fn forecast_horizon(
        &self,
        series: &[f64],
        horizon: usize,
    ) -> Result<ForecastResult, ForecastError> {
        if horizon == 0 {
            return Err(ForecastError::ZeroHorizon);
        }
        let lags = self.lag_config.lags;
        if series.len() < lags {
            return Err(ForecastError::LagWindowUnavailable {
                need: lags,
                got: series.len(),
            });
        }
        let mut window: Vec<f64> = series[series.len() - lags..].to_vec();
        let mut point = Vec::with_capacity(horizon);
        let mut low = Vec::with_capacity(horizon);
        let mut high = Vec::with_capacity(horizon);
        let mut spread = Vec::with_capacity(horizon);
        let mut preds = vec![0.0; self.trees.len()];
        for _ in 0..horizon {
            for (p, t) in preds.iter_mut().zip(&self.trees) {
                *p = t.predict(&window);
            }
            let mean = preds.iter().sum::<f64>() / preds.len() as f64;
            let mut sorted = preds.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            point.push(mean);
            low.push(quantile(&sorted, 0.025).min(mean));
            high.push(quantile(&sorted, 0.975).max(mean));
            spread.push((sorted[0], sorted[sorted.len() - 1]));
            window.rotate_left(1);
            *window.last_mut().unwrap() = mean;
        }
        Ok(ForecastResult {
            point_forecast: point,
            interval_low: low,
            interval_high: high,
            per_step_tree_spread: spread,
        })
    }
}

/// Flat forecast repeating the last training value.
pub fn naive_forecast(train: &[f64], steps: usize) -> Result<Vec<f64>, ForecastError> {
    match train.last() {
        Some(&last) => Ok(vec![last; steps]),
        None => Err(ForecastError::SeriesTooShort { need: 1, got: 0 }),
    }
}

/// A series that could not be extended and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSymbol {
    pub ticker: String,
    pub reason: String,
}

/// Appends `lag.horizon` business days of recursive point forecasts to
/// every series in the table, fitting one forest per symbol on its full
/// history. Symbol seeds derive from the ticker name, so adding or removing
/// other symbols does not perturb a given series' forecast. Symbols that
/// cannot be fitted are dropped and reported.
pub fn extend_with_forecasts(
    prices: &PriceTable,
    lag: &LagConfig,
    forest: &ForestConfig,
) -> Result<(PriceTable, Vec<SkippedSymbol>), ForecastError> {
    lag.validate()?;
    forest.validate()?;
    let outcomes: Vec<Result<Vec<f64>, String>> = (0..prices.num_symbols())
        .into_par_iter()
        .map(|i| {
            let series = prices.series(i);
            let (features, targets) = make_supervised(&series, lag).map_err(|e| e.to_string())?;
            let cfg = ForestConfig {
                seed: symbol_seed(forest.seed, &prices.symbols()[i]),
                ..*forest
            };
            let model = fit_forest(&features, &targets, lag, &cfg).map_err(|e| e.to_string())?;
            let result = model
                .forecast_horizon(&series, lag.horizon)
                .map_err(|e| e.to_string())?;
            let mut extended = series;
            extended.extend_from_slice(&result.point_forecast);
            Ok(extended)
        })
        .collect();

    let mut kept_symbols = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(row) => {
                kept_symbols.push(prices.symbols()[i].clone());
                rows.push(row);
            }
            Err(reason) => skipped.push(SkippedSymbol {
                ticker: prices.symbols()[i].clone(),
                reason,
            }),
        }
    }
    if kept_symbols.is_empty() {
        return Err(ForecastError::NothingExtended(
            skipped
                .first()
                .map(|s| format!("{}: {}", s.ticker, s.reason))
                .unwrap_or_default(),
        ));
    }
    let mut dates = prices.dates().to_vec();
    dates.extend(next_trading_days(*prices.dates().last().unwrap(), lag.horizon));
    let n_cols = dates.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let matrix = Array2::from_shape_vec((kept_symbols.len(), n_cols), flat)
        .map_err(|e| MarketDataError::Shape(e.to_string()))?;
    let table = PriceTable::new(kept_symbols, dates, matrix)?;
    Ok((table, skipped))
}
