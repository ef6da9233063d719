//! `esgmv ingest`: raw CSVs in, canonical dataset out.

use std::fs;

use anyhow::{Context, Result};
use esgmv::market_data::{join_universe, load_esg, load_prices};

use crate::manifest::RunManifest;
use crate::IngestArgs;

use super::{parse_window, write_text, Outcome};

pub fn run(args: IngestArgs) -> Result<Outcome> {
    let window = parse_window(&args.window)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let prices = load_prices(&args.prices, Some(&window), args.min_coverage)
        .with_context(|| format!("loading prices from {}", args.prices.display()))?;
    let esg =
        load_esg(&args.esg).with_context(|| format!("loading ESG from {}", args.esg.display()))?;
    let (joined_prices, joined_esg) = join_universe(&prices, &esg)?;

    write_text(&args.out.join("prices.csv"), &joined_prices.to_canonical_csv())?;
    write_text(&args.out.join("esg.csv"), &joined_esg.to_canonical_csv())?;

    let mut manifest = RunManifest::new("ingest");
    manifest
        .flag("window", &args.window)
        .flag("min_coverage", args.min_coverage)
        .output("prices.csv")
        .output("esg.csv");
    manifest.input(&args.prices)?;
    manifest.input(&args.esg)?;
    manifest.write(&args.out)?;

    println!(
        "prices: {} tickers x {} dates inside {} to {} at {:.0}% coverage",
        prices.num_symbols(),
        prices.num_dates(),
        window.start(),
        window.end(),
        100.0 * args.min_coverage
    );
    println!(
        "universe: {} retained of {} priced and {} rated",
        joined_prices.num_symbols(),
        prices.num_symbols(),
        esg.len()
    );
    println!("wrote {}", args.out.join("prices.csv").display());
    println!("wrote {}", args.out.join("esg.csv").display());
    Ok(Outcome::Complete)
}
