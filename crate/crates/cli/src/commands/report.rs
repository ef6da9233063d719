//! `esgmv report`: per-ticker series dumps ready for plotting.
//!
//! Each ticker gets a `plot_{ticker}.csv` with one row per date and a
//! `segment` column marking which part of the pipeline produced it:
//!
//! * `train`: in-sample fit over the training split,
//! * `test`: one-step-ahead predictions on held-out closes,
//! * `forecast`: the forward horizon with interval bounds.
//!
//! Cells that do not apply to a segment (actuals past the last close, interval
//! bounds in sample) are left empty.

use std::fs;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use esgmv::forecast::{
    fit_forest, make_supervised, split_train_test, symbol_seed, ForecastResult, ForestConfig,
    LagConfig,
};
use esgmv::market_data::{load_prices, next_trading_days};
use rayon::prelude::*;

use crate::manifest::RunManifest;
use crate::ReportArgs;

use super::{num, select_tickers, write_text, Outcome};

struct TickerReport {
    /// Rows for the supervised part of the training split, aligned with
    /// `dates[lags..cut]`.
    train_fit: Vec<f64>,
    /// One-step-ahead predictions aligned with `dates[cut..]`.
    test_fit: Vec<f64>,
    horizon: ForecastResult,
}

pub fn run(args: ReportArgs) -> Result<Outcome> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let prices_path = args.dataset.join("prices.csv");
    let table = load_prices(&prices_path, None, 0.0)
        .with_context(|| format!("loading {}", prices_path.display()))?;
    let indices = select_tickers(&table, &args.ticker)?;

    let lag = LagConfig {
        lags: args.model.lags,
        horizon: args.model.horizon,
    };
    let base = ForestConfig {
        n_trees: args.model.trees,
        seed: args.model.seed,
        ..ForestConfig::default()
    };

    let reports: Vec<(usize, String, Result<TickerReport, String>)> = indices
        .par_iter()
        .map(|&i| {
            let ticker = table.symbols()[i].clone();
            let outcome = report_one(&ticker, &table.series(i), &lag, &base);
            (i, ticker, outcome)
        })
        .collect();

    let future_dates = next_trading_days(*table.dates().last().unwrap(), lag.horizon);

    let mut manifest = RunManifest::new("report");
    manifest
        .flag("ticker", &args.ticker)
        .flag("trees", base.n_trees)
        .flag("lags", lag.lags)
        .flag("horizon", lag.horizon)
        .seed("forest", base.seed);
    manifest.input(&prices_path)?;

    let mut produced = 0usize;
    for (i, ticker, outcome) in &reports {
        match outcome {
            Err(reason) => {
                manifest.failure(ticker.clone(), reason.clone());
            }
            Ok(tr) => {
                produced += 1;
                let name = format!("plot_{ticker}.csv");
                let series = table.series(*i);
                let csv = plot_csv(tr, &series, table.dates(), &future_dates, lag.lags);
                write_text(&args.out.join(&name), &csv)?;
                manifest.output(&name);
            }
        }
    }

    let partial = manifest.has_failures();
    manifest.write(&args.out)?;

    println!("report: plot series written for {produced} of {} tickers", indices.len());
    if partial {
        println!("some items were skipped; see manifest.json");
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Complete)
}

fn report_one(
    ticker: &str,
    series: &[f64],
    lag: &LagConfig,
    base: &ForestConfig,
) -> Result<TickerReport, String> {
    let (train, test) = split_train_test(series).map_err(|e| e.to_string())?;
    let (features, targets) = make_supervised(train, lag).map_err(|e| e.to_string())?;
    let cfg = ForestConfig {
        seed: symbol_seed(base.seed, ticker),
        ..*base
    };
    let model = fit_forest(&features, &targets, lag, &cfg).map_err(|e| e.to_string())?;
    let train_fit = model.predict_rows(&features);
    let test_fit = model.predict_test(train, test).map_err(|e| e.to_string())?;
    let horizon = model
        .forecast_horizon(series, lag.horizon)
        .map_err(|e| e.to_string())?;
    Ok(TickerReport {
        train_fit,
        test_fit,
        horizon,
    })
}

fn plot_csv(
    tr: &TickerReport,
    series: &[f64],
    dates: &[NaiveDate],
    future_dates: &[NaiveDate],
    lags: usize,
) -> String {
    let cut = series.len() - tr.test_fit.len();
    let mut out = String::from("date,segment,actual,predicted,low,high\n");
    for (k, fitted) in tr.train_fit.iter().enumerate() {
        let t = lags + k;
        out.push_str(&format!(
            "{},train,{},{},,\n",
            dates[t],
            num(series[t]),
            num(*fitted)
        ));
    }
    for (k, fitted) in tr.test_fit.iter().enumerate() {
        let t = cut + k;
        out.push_str(&format!(
            "{},test,{},{},,\n",
            dates[t],
            num(series[t]),
            num(*fitted)
        ));
    }
    for (k, date) in future_dates.iter().enumerate() {
        out.push_str(&format!(
            "{date},forecast,,{},{},{}\n",
            num(tr.horizon.point_forecast[k]),
            num(tr.horizon.interval_low[k]),
            num(tr.horizon.interval_high[k])
        ));
    }
    out
}
