//! Command line front end: wires ingestion, forecasting, metrics,
//! optimization and the randomized experiment into reproducible batch runs.
//!
//! Exit codes: 0 on success, 1 on error, 3 when a run completed but skipped
//! some items (the manifest lists what and why).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "esgmv",
    version,
    about = "ETF price forecasting and ESG-aware portfolio construction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load raw price and ESG CSVs, filter and join them, and write the
    /// canonical dataset.
    Ingest(IngestArgs),
    /// Fit forests per ticker, score them against the naive baseline, and
    /// forecast forward.
    Forecast(ForecastArgs),
    /// Solve both allocation objectives on the whole dataset.
    Optimize(OptimizeArgs),
    /// Repeat both optimizations over randomly sampled sub-markets.
    Experiment(ExperimentArgs),
    /// Emit per-ticker actual/predicted series for plotting.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Price CSV, wide (date,TICKER,...) or long (date,ticker,adj_close).
    #[arg(long)]
    prices: PathBuf,
    /// ESG CSV with ticker,esg_score rows.
    #[arg(long)]
    esg: PathBuf,
    /// Inclusive date window as START:END.
    #[arg(long, default_value = "2011-11-30:2021-11-30")]
    window: String,
    /// Minimum fraction of in-window dates a ticker must cover natively.
    #[arg(long, default_value_t = 0.95)]
    min_coverage: f64,
    /// Output directory for the canonical dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    /// Directory produced by `esgmv ingest`.
    #[arg(long)]
    dataset: PathBuf,
    /// One ticker, or `all`.
    #[arg(long, default_value = "all")]
    ticker: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Annualized risk-free rate used in excess returns.
    #[arg(long, default_value_t = 0.0)]
    risk_free: f64,
    /// Optimize on the historical window only, without the forecast
    /// extension.
    #[arg(long)]
    no_forecast: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Number of sampled markets.
    #[arg(long, default_value_t = 12)]
    runs: usize,
    /// Tickers per sampled market.
    #[arg(long, default_value_t = 100)]
    market_size: usize,
    #[arg(long, default_value_t = 0.0)]
    risk_free: f64,
    #[arg(long)]
    no_forecast: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// One ticker, or `all`.
    #[arg(long, default_value = "all")]
    ticker: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Forecast-model knobs shared by every command that fits forests.
#[derive(Args)]
struct ModelArgs {
    /// Trees per forest.
    #[arg(long, default_value_t = 10_000)]
    trees: usize,
    /// Lagged closes per supervised row.
    #[arg(long, default_value_t = 20)]
    lags: usize,
    /// Business days to forecast past the last close.
    #[arg(long, default_value_t = 42)]
    horizon: usize,
    /// Base seed for every randomized component.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Forecast(args) => commands::forecast::run(args),
        Command::Optimize(args) => commands::optimize::run(args),
        Command::Experiment(args) => commands::experiment::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match outcome {
        Ok(commands::Outcome::Complete) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
