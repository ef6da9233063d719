//! `esgmv optimize`: both allocation objectives on the full dataset, with
//! the forecast extension applied first unless disabled.

use std::fs;

use anyhow::{Context, Result};
use esgmv::forecast::{extend_with_forecasts, ForestConfig, LagConfig};
use esgmv::market_data::compute_returns;
use esgmv::optimizer::{annualize, optimize_esg_mv, optimize_mv, Portfolio, SolverConfig};

use crate::manifest::RunManifest;
use crate::OptimizeArgs;

use super::{load_dataset, stats_csv, weights_csv, warn_if_ratio_meaningless, write_text, Outcome};

pub fn run(args: OptimizeArgs) -> Result<Outcome> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let (prices, esg) = load_dataset(&args.dataset)?;

    let mut manifest = RunManifest::new("optimize");
    manifest
        .flag("risk_free", args.risk_free)
        .flag("no_forecast", args.no_forecast)
        .flag("trees", args.model.trees)
        .flag("lags", args.model.lags)
        .flag("horizon", args.model.horizon)
        .seed("base", args.model.seed)
        .output("weights.csv")
        .output("stats.csv");
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
        println!(
            "extended {} series by {} business days of forecasts",
            extended.num_symbols(),
            lag.horizon
        );
        extended
    };

    let panel = compute_returns(&table).context("computing daily returns")?;
    let market = annualize(&panel, &esg, args.risk_free).context("building market inputs")?;
    let solver = SolverConfig {
        seed: args.model.seed,
        ..SolverConfig::default()
    };
    let mv = optimize_mv(&market, &solver).context("solving the Sharpe objective")?;
    let esg_mv =
        optimize_esg_mv(&market, &solver).context("solving the ESG-weighted objective")?;

    write_text(
        &args.out.join("weights.csv"),
        &weights_csv(market.symbols(), &esg, &mv, &esg_mv)?,
    )?;
    write_text(
        &args.out.join("stats.csv"),
        &stats_csv(&[("mv", &mv), ("esg_mv", &esg_mv)]),
    )?;
    let partial = manifest.has_failures();
    manifest.write(&args.out)?;

    print_model("mv", &mv);
    print_model("esg_mv", &esg_mv);
    warn_if_ratio_meaningless("mv", &mv);
    warn_if_ratio_meaningless("esg_mv", &esg_mv);

    if partial {
        println!("some series were skipped; see manifest.json");
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Complete)
}

fn print_model(name: &str, p: &Portfolio) {
    let sharpe = p
        .sharpe
        .map(|s| format!("{s:.3}"))
        .unwrap_or_else(|| "undefined".to_string());
    println!(
        "{name}: sharpe {sharpe} risk {:.3}% return {:.3}% esg {:.3}",
        100.0 * p.risk_annual,
        100.0 * p.return_annual,
        p.esg_mean
    );
}
