//! `esgmv experiment`: the randomized sub-market comparison, end to end.

use std::fs;

use anyhow::{Context, Result};
use esgmv::experiment::{aggregate_deltas, run_experiment, ExperimentConfig};
use esgmv::forecast::{extend_with_forecasts, ForestConfig, LagConfig};
use esgmv::market_data::compute_returns;
use esgmv::optimizer::{annualize, Portfolio, SolverConfig};

use crate::manifest::RunManifest;
use crate::ExperimentArgs;

use super::{
    fmt_delta, load_dataset, opt_num, results_csv, weights_csv, write_text, Outcome,
};

pub fn run(args: ExperimentArgs) -> Result<Outcome> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let (prices, esg) = load_dataset(&args.dataset)?;

    let mut manifest = RunManifest::new("experiment");
    manifest
        .flag("runs", args.runs)
        .flag("market_size", args.market_size)
        .flag("risk_free", args.risk_free)
        .flag("no_forecast", args.no_forecast)
        .flag("trees", args.model.trees)
        .flag("lags", args.model.lags)
        .flag("horizon", args.model.horizon)
        .seed("base", args.model.seed)
        .output("results.csv")
        .output("summary.csv");
    manifest.input(&args.dataset.join("prices.csv"))?;
    manifest.input(&args.dataset.join("esg.csv"))?;

    let lag = LagConfig {
        lags: args.model.lags,
        horizon: args.model.horizon,
    };
    let forest = ForestConfig {
        n_trees: args.model.trees,
        seed: args.model.seed,
        ..ForestConfig::default()
    };
    let table = if args.no_forecast {
        prices
    } else {
        let (extended, skipped) = extend_with_forecasts(&prices, &lag, &forest)
            .context("extending series with forecasts")?;
        for s in &skipped {
            manifest.failure(format!("forecast {}", s.ticker), s.reason.clone());
        }
        extended
    };

    let panel = compute_returns(&table).context("computing daily returns")?;
    let market = annualize(&panel, &esg, args.risk_free).context("building market inputs")?;
    let cfg = ExperimentConfig {
        runs: args.runs,
        market_size: args.market_size,
        seed_base: args.model.seed,
        solver: SolverConfig {
            seed: args.model.seed,
            ..SolverConfig::default()
        },
    };
    let records = run_experiment(&market, &cfg).context("running the experiment")?;

    let mut rows: Vec<(usize, &str, &Portfolio)> = Vec::new();
    for r in &records {
        match &r.mv {
            Ok(p) => rows.push((r.run_index, "mv", p)),
            Err(e) => {
                manifest.failure(format!("run {} mv", r.run_index), e.to_string());
            }
        }
        match &r.esg_mv {
            Ok(p) => rows.push((r.run_index, "esg_mv", p)),
            Err(e) => {
                manifest.failure(format!("run {} esg_mv", r.run_index), e.to_string());
            }
        }
    }
    write_text(&args.out.join("results.csv"), &results_csv(&rows))?;

    for r in &records {
        if let (Ok(mv), Ok(esg_mv)) = (&r.mv, &r.esg_mv) {
            let name = format!("weights_run_{}.csv", r.run_index);
            write_text(
                &args.out.join(&name),
                &weights_csv(&r.market_symbols, &esg, mv, esg_mv)?,
            )?;
            manifest.output(&name);
        }
    }

    let summary = aggregate_deltas(&records);
    let summary_csv = format!(
        "sharpe_delta_pct,risk_delta_pct,return_delta_pct,esg_delta_pct,successful_runs\n{},{},{},{},{}\n",
        opt_num(summary.sharpe_delta_pct),
        opt_num(summary.risk_delta_pct),
        opt_num(summary.return_delta_pct),
        opt_num(summary.esg_delta_pct),
        summary.successful_runs
    );
    write_text(&args.out.join("summary.csv"), &summary_csv)?;

    let partial = manifest.has_failures();
    manifest.write(&args.out)?;

    println!(
        "experiment: {} runs of {} tickers, {} fully solved",
        args.runs, args.market_size, summary.successful_runs
    );
    println!(
        "esg_mv vs mv: sharpe {} risk {} return {} esg {}",
        fmt_delta(summary.sharpe_delta_pct),
        fmt_delta(summary.risk_delta_pct),
        fmt_delta(summary.return_delta_pct),
        fmt_delta(summary.esg_delta_pct)
    );
    if partial {
        println!("some items were skipped; see manifest.json");
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Complete)
}
