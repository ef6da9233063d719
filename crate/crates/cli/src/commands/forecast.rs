//! `esgmv forecast`: per-ticker forests, scaled-error scores against the
//! naive baseline, and recursive forecasts past the last close.

use std::fs;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use esgmv::forecast::{
    fit_forest, make_supervised, naive_forecast, split_train_test, symbol_seed, ForecastResult,
    ForestConfig, LagConfig,
};
use esgmv::market_data::{load_prices, next_trading_days};
use esgmv::metrics::{scaled_error_report, ScaledErrorReport};
use rayon::prelude::*;

use crate::manifest::RunManifest;
use crate::ForecastArgs;

use super::{num, select_tickers, write_text, Outcome};

struct TickerForecast {
    ticker: String,
    horizon: ForecastResult,
    /// None when the training series is constant and scaled errors are
    /// undefined; the reason travels separately.
    scores: Option<(ScaledErrorReport, ScaledErrorReport)>,
    score_failure: Option<String>,
    last_value: f64,
}

pub fn run(args: ForecastArgs) -> Result<Outcome> {
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

    let outcomes: Vec<(String, Result<TickerForecast, String>)> = indices
        .par_iter()
        .map(|&i| {
            let ticker = table.symbols()[i].clone();
            let result = forecast_one(&ticker, &table.series(i), &lag, &base);
            (ticker, result)
        })
        .collect();

    let future_dates = next_trading_days(*table.dates().last().unwrap(), lag.horizon);

    let mut manifest = RunManifest::new("forecast");
    manifest
        .flag("ticker", &args.ticker)
        .flag("trees", base.n_trees)
        .flag("lags", lag.lags)
        .flag("horizon", lag.horizon)
        .seed("forest", base.seed)
        .output("forecast.csv")
        .output("metrics.csv");
    manifest.input(&prices_path)?;

    let mut forecast_csv = String::from("ticker,date,point,low,high\n");
    let mut metrics_csv = String::from("ticker,model,mase,rmsse,ci_low,ci_high\n");
    let mut produced = 0usize;
    for (ticker, outcome) in &outcomes {
        match outcome {
            Err(reason) => {
                manifest.failure(ticker.clone(), reason.clone());
            }
            Ok(tf) => {
                produced += 1;
                push_forecast_rows(&mut forecast_csv, tf, &future_dates);
                match &tf.scores {
                    Some((rf, naive)) => {
                        push_metric_rows(&mut metrics_csv, tf, rf, naive);
                    }
                    None => {
                        manifest.failure(
                            format!("{ticker} metrics"),
                            tf.score_failure.clone().unwrap_or_default(),
                        );
                    }
                }
            }
        }
    }

    write_text(&args.out.join("forecast.csv"), &forecast_csv)?;
    write_text(&args.out.join("metrics.csv"), &metrics_csv)?;
    let partial = manifest.has_failures();
    manifest.write(&args.out)?;

    println!(
        "forecast: {} of {} tickers forecast {} business days ahead",
        produced,
        indices.len(),
        lag.horizon
    );
    if partial {
        println!("some items were skipped; see manifest.json");
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Complete)
}

fn forecast_one(
    ticker: &str,
    series: &[f64],
    lag: &LagConfig,
    base: &ForestConfig,
) -> Result<TickerForecast, String> {
    let (train, test) = split_train_test(series).map_err(|e| e.to_string())?;
    let (features, targets) = make_supervised(train, lag).map_err(|e| e.to_string())?;
    let cfg = ForestConfig {
        seed: symbol_seed(base.seed, ticker),
        ..*base
    };
    let model = fit_forest(&features, &targets, lag, &cfg).map_err(|e| e.to_string())?;

    let rf_test = model.predict_test(train, test).map_err(|e| e.to_string())?;
    let naive_test = naive_forecast(train, test.len()).map_err(|e| e.to_string())?;
    let (scores, score_failure) = match (
        scaled_error_report(test, &rf_test, train),
        scaled_error_report(test, &naive_test, train),
    ) {
        (Ok(rf), Ok(naive)) => (Some((rf, naive)), None),
        (Err(e), _) | (_, Err(e)) => (None, Some(e.to_string())),
    };

    // The forward forecast conditions on the latest observed closes, while
    // the model itself was fitted on the training split only.
    let horizon = model
        .forecast_horizon(series, lag.horizon)
        .map_err(|e| e.to_string())?;

    Ok(TickerForecast {
        ticker: ticker.to_string(),
        horizon,
        scores,
        score_failure,
        last_value: *series.last().unwrap(),
    })
}

fn push_forecast_rows(out: &mut String, tf: &TickerForecast, dates: &[NaiveDate]) {
    for (k, date) in dates.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            tf.ticker,
            date.format("%Y-%m-%d"),
            num(tf.horizon.point_forecast[k]),
            num(tf.horizon.interval_low[k]),
            num(tf.horizon.interval_high[k]),
        ));
    }
}

fn push_metric_rows(
    out: &mut String,
    tf: &TickerForecast,
    rf: &ScaledErrorReport,
    naive: &ScaledErrorReport,
) {
    // The interval columns summarize the forward forecast: the envelope of
    // the per-step ensemble interval for the forest, and the degenerate
    // last-value interval for the baseline.
    let ci_low = tf
        .horizon
        .interval_low
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let ci_high = tf
        .horizon
        .interval_high
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    out.push_str(&format!(
        "{},rf,{},{},{},{}\n",
        tf.ticker,
        num(rf.mase),
        num(rf.rmsse),
        num(ci_low),
        num(ci_high)
    ));
    out.push_str(&format!(
        "{},naive,{},{},{},{}\n",
        tf.ticker,
        num(naive.mase),
        num(naive.rmsse),
        num(tf.last_value),
        num(tf.last_value)
    ));
}
