//! Subcommand implementations and the small shared vocabulary between
//! them: dataset loading, window parsing, and the CSV writers whose byte
//! layout must stay identical across reruns.

pub mod experiment;
pub mod forecast;
pub mod ingest;
pub mod optimize;
pub mod report;

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use esgmv::market_data::{join_universe, load_esg, load_prices, DateWindow, EsgTable, PriceTable};
use esgmv::optimizer::Portfolio;

/// Whether every requested item was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some items were skipped; the manifest says which. Exit code 3.
    Partial,
}

/// Parses `START:END` into an inclusive window.
pub fn parse_window(raw: &str) -> Result<DateWindow> {
    let (start, end) = raw
        .split_once(':')
        .with_context(|| format!("window `{raw}` is not START:END"))?;
    let start = start
        .trim()
        .parse()
        .with_context(|| format!("window start `{start}` is not YYYY-MM-DD"))?;
    let end = end
        .trim()
        .parse()
        .with_context(|| format!("window end `{end}` is not YYYY-MM-DD"))?;
    DateWindow::new(start, end).context("invalid window")
}

/// Loads a canonical dataset directory (prices.csv + esg.csv) and joins the
/// two universes.
pub fn load_dataset(dir: &Path) -> Result<(PriceTable, EsgTable)> {
    let prices_path = dir.join("prices.csv");
    let esg_path = dir.join("esg.csv");
    let prices = load_prices(&prices_path, None, 0.0)
        .with_context(|| format!("loading {}", prices_path.display()))?;
    let esg = load_esg(&esg_path).with_context(|| format!("loading {}", esg_path.display()))?;
    join_universe(&prices, &esg).context("joining price and ESG universes")
}

/// Row indices for `--ticker`: every row for `all`, else the named one.
pub fn select_tickers(table: &PriceTable, ticker: &str) -> Result<Vec<usize>> {
    if ticker.eq_ignore_ascii_case("all") {
        return Ok((0..table.num_symbols()).collect());
    }
    match table.ticker_index(ticker) {
        Some(i) => Ok(vec![i]),
        None => bail!("unknown ticker `{ticker}`: not in the dataset"),
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Shortest-round-trip float formatting; the one format used in every CSV.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One statistics row. The sharpe column always reports the plain Sharpe
/// ratio so rows of different objectives compare directly; `objective`
/// carries each model's own maximized value.
fn stats_row(p: &Portfolio) -> String {
    format!(
        "{},{},{},{},{},{}",
        opt_num(p.sharpe),
        num(100.0 * p.risk_annual),
        num(100.0 * p.return_annual),
        num(p.esg_mean),
        num(p.objective_value),
        p.converged
    )
}

pub const STATS_COLUMNS: &str = "sharpe,risk_pct,return_pct,mean_esg,objective,converged";

/// stats.csv body: one row per model over the same market.
pub fn stats_csv(rows: &[(&str, &Portfolio)]) -> String {
    let mut out = format!("model,{STATS_COLUMNS}\n");
    for (model, p) in rows {
        out.push_str(&format!("{},{}\n", model, stats_row(p)));
    }
    out
}

/// results.csv body: stats keyed by run index and model.
pub fn results_csv(rows: &[(usize, &str, &Portfolio)]) -> String {
    let mut out = format!("run,{},{STATS_COLUMNS}\n", "model");
    for (run, model, p) in rows {
        out.push_str(&format!("{},{},{}\n", run, model, stats_row(p)));
    }
    out
}

/// Side-by-side allocation table, sorted by ESG score then ticker so the
/// sustainability gradient reads top to bottom.
pub fn weights_csv(
    symbols: &[String],
    esg: &EsgTable,
    mv: &Portfolio,
    esg_mv: &Portfolio,
) -> Result<String> {
    let mut rows: Vec<(f64, &String, f64, f64)> = Vec::with_capacity(symbols.len());
    for (i, s) in symbols.iter().enumerate() {
        let score = esg
            .get(s)
            .with_context(|| format!("no ESG score for `{s}`"))?;
        rows.push((score, s, mv.weights[i], esg_mv.weights[i]));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let mut out = String::from("ticker,esg_score,mv_weight_pct,esg_mv_weight_pct\n");
    for (score, ticker, w_mv, w_esg) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            ticker,
            num(score),
            num(100.0 * w_mv),
            num(100.0 * w_esg)
        ));
    }
    Ok(out)
}

/// Human-readable percent delta, `n/a` when undefined.
pub fn fmt_delta(v: Option<f64>) -> String {
    match v {
        Some(d) => format!("{d:+.2}%"),
        None => "n/a".to_string(),
    }
}

pub fn warn_if_ratio_meaningless(model: &str, p: &Portfolio) {
    if p.non_positive_sharpe {
        println!(
            "warning: {model} found no allocation with positive excess return; \
             Sharpe-based comparisons are not meaningful here"
        );
    }
    if !p.converged {
        println!("warning: {model} hit the iteration limit before converging");
    }
}
