//! Price and ESG ingestion: CSV loading, calendar windowing, the fill
//! policy, universe joins, and daily return / covariance panels.
//!
//! Two price layouts are accepted. Wide files carry one column per ticker:
//!
//! ```csv
//! date,SPY,QQQ
//! 2020-01-02,321.5,216.1
//! ```
//!
//! Long files carry one observation per row with `date`, a ticker column
//! (`ticker`, `symbol` or `fund_symbol`) and an adjusted close column
//! (`adj_close`, `adjusted_close` or `adjclose`). Layout is detected from
//! the header. ESG files carry `ticker,esg_score` with scores on a 0 to 10
//! scale where higher is better.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::{Array1, Array2};
use thiserror::Error;

/// Fraction of in-window dates a ticker must natively cover to be kept.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.95;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("failed to read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("input has no data rows")]
    EmptyInput,
    #[error("required column `{0}` is missing")]
    MissingColumn(&'static str),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("unparseable date `{0}` (expected YYYY-MM-DD)")]
    BadDate(String),
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("duplicate observation for {ticker} on {date}")]
    DuplicateObservation { ticker: String, date: NaiveDate },
    #[error("duplicate ticker `{0}`")]
    DuplicateTicker(String),
    #[error("non-numeric price for {ticker} on {date}: `{raw}`")]
    BadPrice {
        ticker: String,
        date: NaiveDate,
        raw: String,
    },
    #[error("non-positive or non-finite price for {ticker} on {date}: {value}")]
    InvalidPrice {
        ticker: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("window start {start} is after end {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("minimum coverage must lie in [0, 1], got {0}")]
    InvalidCoverage(f64),
    #[error("no data remains after windowing and coverage filtering")]
    NothingAfterFilter,
    #[error("non-numeric ESG score for {ticker}: `{raw}`")]
    BadScore { ticker: String, raw: String },
    #[error("ESG score for {ticker} outside [0, 10]: {score}")]
    ScoreOutOfRange { ticker: String, score: f64 },
    #[error("price and ESG universes do not intersect")]
    EmptyIntersection,
    #[error("need at least two dates to compute returns, got {0}")]
    TooFewDates(usize),
    #[error("unknown ticker `{0}`")]
    UnknownTicker(String),
    #[error("inconsistent table shape: {0}")]
    Shape(String),
}

/// Inclusive calendar window applied at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateWindow {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, MarketDataError> {
        if start > end {
            return Err(MarketDataError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// Ten year study window ending 2021-11-30, the ingestion default.
    pub fn default_study_window() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2011, 11, 30).unwrap(),
            end: NaiveDate::from_ymd_opt(2021, 11, 30).unwrap(),
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// The next `n` weekdays strictly after `after`.
pub fn next_trading_days(after: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = after;
    while out.len() < n {
        d = d.succ_opt().expect("date overflow");
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
    }
    out
}

/// Rectangular panel of adjusted closing prices, one row per ticker and one
/// column per date. Every cell is finite and strictly positive and the date
/// axis is strictly increasing; construction enforces this.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: Array2<f64>,
}

impl PriceTable {
    pub fn new(
        symbols: Vec<String>,
        dates: Vec<NaiveDate>,
        prices: Array2<f64>,
    ) -> Result<Self, MarketDataError> {
        if symbols.is_empty() || dates.is_empty() {
            return Err(MarketDataError::NothingAfterFilter);
        }
        if prices.nrows() != symbols.len() || prices.ncols() != dates.len() {
            return Err(MarketDataError::Shape(format!(
                "{} symbols x {} dates but price matrix is {}x{}",
                symbols.len(),
                dates.len(),
                prices.nrows(),
                prices.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if s.is_empty() {
                return Err(MarketDataError::Csv("empty ticker name".into()));
            }
            if !seen.insert(s.clone()) {
                return Err(MarketDataError::DuplicateTicker(s.clone()));
            }
        }
        for w in dates.windows(2) {
            if w[0] >= w[1] {
                return Err(MarketDataError::DuplicateDate(w[1]));
            }
        }
        for (i, row) in prices.rows().into_iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(MarketDataError::InvalidPrice {
                        ticker: symbols[i].clone(),
                        date: dates[k],
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            symbols,
            dates,
            prices,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn num_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == ticker)
    }

    /// Price series for one ticker row, oldest first.
    pub fn series(&self, row: usize) -> Vec<f64> {
        self.prices.row(row).to_vec()
    }

    /// Restricts the table to `tickers`, in the order given.
    pub fn select(&self, tickers: &[String]) -> Result<Self, MarketDataError> {
        let mut rows = Vec::with_capacity(tickers.len());
        for t in tickers {
            rows.push(
                self.ticker_index(t)
                    .ok_or_else(|| MarketDataError::UnknownTicker(t.clone()))?,
            );
        }
        let mut prices = Array2::zeros((tickers.len(), self.num_dates()));
        for (out_i, &src_i) in rows.iter().enumerate() {
            prices.row_mut(out_i).assign(&self.prices.row(src_i));
        }
        Self::new(tickers.to_vec(), self.dates.clone(), prices)
    }

    /// Serializes to wide CSV. Floats are printed with the shortest
    /// round-trip representation, so parse -> write -> parse is bit exact.
    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::from("date");
        for s in &self.symbols {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for (k, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for i in 0..self.symbols.len() {
                out.push(',');
                out.push_str(&format!("{}", self.prices[[i, k]]));
            }
            out.push('\n');
        }
        out
    }
}

/// Ticker to ESG score map. Scores live on a 0 to 10 scale; zero is a valid
/// observed score, not a missing marker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EsgTable {
    scores: BTreeMap<String, f64>,
}

impl EsgTable {
    pub fn new<I>(entries: I) -> Result<Self, MarketDataError>
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        let mut scores = BTreeMap::new();
        for (ticker, score) in entries {
            if !score.is_finite() || !(0.0..=10.0).contains(&score) {
                return Err(MarketDataError::ScoreOutOfRange { ticker, score });
            }
            if scores.insert(ticker.clone(), score).is_some() {
                return Err(MarketDataError::DuplicateTicker(ticker));
            }
        }
        Ok(Self { scores })
    }

    pub fn get(&self, ticker: &str) -> Option<f64> {
        self.scores.get(ticker).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entries in ascending ticker order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(t, &s)| (t.as_str(), s))
    }

    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::from("ticker,esg_score\n");
        for (t, s) in self.iter() {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }
}

/// Daily simple returns plus their first two sample moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub symbols: Vec<String>,
    /// Dates of the return observations (the later date of each price pair).
    pub dates: Vec<NaiveDate>,
    /// One row per symbol, one column per return observation.
    pub returns: Array2<f64>,
    pub mean_daily: Array1<f64>,
    /// Sample covariance with denominator n-1; exactly symmetric by
    /// construction. All zeros when only one return observation exists.
    pub cov_daily: Array2<f64>,
}

fn read_file(path: &Path) -> Result<String, MarketDataError> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            MarketDataError::MissingFile(path.to_path_buf())
        } else {
            MarketDataError::Io {
                path: path.to_path_buf(),
                message: e.to_string(),
            }
        }
    })
}

/// Lowercases a header and squeezes runs of non-alphanumerics to `_`, so
/// `Adj Close`, `adj_close` and `Adj. Close` all compare equal.
fn normalize_header(h: &str) -> String {
    let mut out = String::with_capacity(h.len());
    let mut pending_sep = false;
    for c in h.trim().chars() {
        if c.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

fn parse_date(raw: &str) -> Result<NaiveDate, MarketDataError> {
    raw.trim()
        .parse::<NaiveDate>()
        .map_err(|_| MarketDataError::BadDate(raw.trim().to_string()))
}

const TICKER_HEADERS: [&str; 3] = ["ticker", "symbol", "fund_symbol"];
const PRICE_HEADERS: [&str; 4] = ["adj_close", "adjusted_close", "adjclose", "price"];
const ESG_HEADERS: [&str; 3] = ["esg_score", "esg", "score"];

/// Loads a price CSV (wide or long), applies the window and the native
/// coverage filter, then forward fills and back fills the survivors.
pub fn load_prices(
    path: &Path,
    window: Option<&DateWindow>,
    min_coverage: f64,
) -> Result<PriceTable, MarketDataError> {
    parse_prices(&read_file(path)?, window, min_coverage)
}

/// As [`load_prices`] but from in-memory text.
pub fn parse_prices(
    text: &str,
    window: Option<&DateWindow>,
    min_coverage: f64,
) -> Result<PriceTable, MarketDataError> {
    if !(0.0..=1.0).contains(&min_coverage) {
        return Err(MarketDataError::InvalidCoverage(min_coverage));
    }
    if text.trim().is_empty() {
        return Err(MarketDataError::EmptyInput);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| MarketDataError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let normalized: Vec<String> = headers.iter().map(|h| normalize_header(h)).collect();

    let is_long = normalized
        .iter()
        .any(|h| TICKER_HEADERS.contains(&h.as_str()));
    let (symbols, dates, grid) = if is_long {
        parse_long(&mut rdr, &normalized)?
    } else {
        parse_wide(&mut rdr, &headers, &normalized)?
    };
    finish_prices(symbols, dates, grid, window, min_coverage)
}

type RawGrid = Vec<Vec<f64>>; // symbol-major, NaN marks a missing cell

fn parse_wide(
    rdr: &mut csv::Reader<&[u8]>,
    headers: &[String],
    normalized: &[String],
) -> Result<(Vec<String>, Vec<NaiveDate>, RawGrid), MarketDataError> {
    if normalized.first().map(String::as_str) != Some("date") {
        return Err(MarketDataError::MissingColumn("date"));
    }
    let symbols: Vec<String> = headers[1..].iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for s in &symbols {
        if s.is_empty() {
            return Err(MarketDataError::Csv("empty ticker column header".into()));
        }
        if !seen.insert(s.as_str()) {
            return Err(MarketDataError::DuplicateTicker(s.clone()));
        }
    }

    let mut by_date: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| MarketDataError::Csv(e.to_string()))?;
        let date = parse_date(record.get(0).unwrap_or(""))?;
        let mut row = Vec::with_capacity(symbols.len());
        for (j, s) in symbols.iter().enumerate() {
            let raw = record.get(j + 1).unwrap_or("");
            if raw.is_empty() {
                row.push(f64::NAN);
            } else {
                row.push(raw.parse::<f64>().map_err(|_| MarketDataError::BadPrice {
                    ticker: s.clone(),
                    date,
                    raw: raw.to_string(),
                })?);
            }
        }
        if by_date.insert(date, row).is_some() {
            return Err(MarketDataError::DuplicateDate(date));
        }
    }
    if by_date.is_empty() {
        return Err(MarketDataError::EmptyInput);
    }
    let dates: Vec<NaiveDate> = by_date.keys().copied().collect();
    let mut grid = vec![vec![f64::NAN; dates.len()]; symbols.len()];
    for (k, row) in by_date.values().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            grid[i][k] = v;
        }
    }
    Ok((symbols, dates, grid))
}

fn parse_long(
    rdr: &mut csv::Reader<&[u8]>,
    normalized: &[String],
) -> Result<(Vec<String>, Vec<NaiveDate>, RawGrid), MarketDataError> {
    let col = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| normalized.iter().position(|h| h == n))
    };
    let date_col = col(&["date"]).ok_or(MarketDataError::MissingColumn("date"))?;
    let ticker_col = col(&TICKER_HEADERS).expect("long layout implies a ticker column");
    let price_col = col(&PRICE_HEADERS).ok_or(MarketDataError::MissingColumn("adj_close"))?;

    let mut cells: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut all_dates: std::collections::BTreeSet<NaiveDate> = Default::default();
    let mut any_row = false;
    for record in rdr.records() {
        let record = record.map_err(|e| MarketDataError::Csv(e.to_string()))?;
        any_row = true;
        let ticker = record.get(ticker_col).unwrap_or("").to_string();
        if ticker.is_empty() {
            return Err(MarketDataError::Csv("row with empty ticker".into()));
        }
        let date = parse_date(record.get(date_col).unwrap_or(""))?;
        all_dates.insert(date);
        let raw = record.get(price_col).unwrap_or("");
        if raw.is_empty() {
            cells.entry(ticker).or_default();
            continue;
        }
        let value = raw.parse::<f64>().map_err(|_| MarketDataError::BadPrice {
            ticker: ticker.clone(),
            date,
            raw: raw.to_string(),
        })?;
        if cells.entry(ticker.clone()).or_default().insert(date, value).is_some() {
            return Err(MarketDataError::DuplicateObservation { ticker, date });
        }
    }
    if !any_row {
        return Err(MarketDataError::EmptyInput);
    }
    let symbols: Vec<String> = cells.keys().cloned().collect();
    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let index: BTreeMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(k, &d)| (d, k)).collect();
    let mut grid = vec![vec![f64::NAN; dates.len()]; symbols.len()];
    for (i, s) in symbols.iter().enumerate() {
        for (d, v) in &cells[s] {
            grid[i][index[d]] = *v;
        }
    }
    Ok((symbols, dates, grid))
}

fn finish_prices(
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    grid: RawGrid,
    window: Option<&DateWindow>,
    min_coverage: f64,
) -> Result<PriceTable, MarketDataError> {
    let keep_dates: Vec<usize> = match window {
        Some(w) => (0..dates.len()).filter(|&k| w.contains(dates[k])).collect(),
        None => (0..dates.len()).collect(),
    };
    if keep_dates.is_empty() {
        return Err(MarketDataError::NothingAfterFilter);
    }
    let n_dates = keep_dates.len();

    // Coverage counts native (pre-fill) observations inside the window.
    let mut kept_symbols = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, s) in symbols.iter().enumerate() {
        let row: Vec<f64> = keep_dates.iter().map(|&k| grid[i][k]).collect();
        let native = row.iter().filter(|v| v.is_finite()).count();
        if native == 0 || (native as f64) < min_coverage * n_dates as f64 {
            continue;
        }
        kept_symbols.push(s.clone());
        rows.push(row);
    }
    if kept_symbols.is_empty() {
        return Err(MarketDataError::NothingAfterFilter);
    }

    // Forward fill, then back fill whatever leads the first observation.
    for row in &mut rows {
        let mut last = f64::NAN;
        for v in row.iter_mut() {
            if v.is_finite() {
                last = *v;
            } else if last.is_finite() {
                *v = last;
            }
        }
        let mut next = f64::NAN;
        for v in row.iter_mut().rev() {
            if v.is_finite() {
                next = *v;
            } else if next.is_finite() {
                *v = next;
            }
        }
    }

    let dates: Vec<NaiveDate> = keep_dates.into_iter().map(|k| dates[k]).collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let prices = Array2::from_shape_vec((kept_symbols.len(), n_dates), flat)
        .map_err(|e| MarketDataError::Shape(e.to_string()))?;
    PriceTable::new(kept_symbols, dates, prices)
}

/// Loads an ESG score file. An empty file yields an empty table; rows with
/// an empty score cell are skipped as unrated.
pub fn load_esg(path: &Path) -> Result<EsgTable, MarketDataError> {
    parse_esg(&read_file(path)?)
}

/// As [`load_esg`] but from in-memory text.
pub fn parse_esg(text: &str) -> Result<EsgTable, MarketDataError> {
    if text.trim().is_empty() {
        return Ok(EsgTable::default());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let normalized: Vec<String> = rdr
        .headers()
        .map_err(|e| MarketDataError::Csv(e.to_string()))?
        .iter()
        .map(normalize_header)
        .collect();
    let col = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| normalized.iter().position(|h| h == n))
    };
    let ticker_col = col(&TICKER_HEADERS).ok_or(MarketDataError::MissingColumn("ticker"))?;
    let score_col = col(&ESG_HEADERS).ok_or(MarketDataError::MissingColumn("esg_score"))?;

    let mut entries: Vec<(String, f64)> = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| MarketDataError::Csv(e.to_string()))?;
        let ticker = record.get(ticker_col).unwrap_or("").to_string();
        if ticker.is_empty() {
            return Err(MarketDataError::Csv("row with empty ticker".into()));
        }
        if !seen.insert(ticker.clone()) {
            return Err(MarketDataError::DuplicateTicker(ticker));
        }
        let raw = record.get(score_col).unwrap_or("");
        if raw.is_empty() {
            continue; // unrated
        }
        let score = raw.parse::<f64>().map_err(|_| MarketDataError::BadScore {
            ticker: ticker.clone(),
            raw: raw.to_string(),
        })?;
        entries.push((ticker, score));
    }
    EsgTable::new(entries)
}

/// Intersects the priced universe with the rated universe, preserving the
/// price table's symbol order. Zero scores are kept; they are data.
pub fn join_universe(
    prices: &PriceTable,
    esg: &EsgTable,
) -> Result<(PriceTable, EsgTable), MarketDataError> {
    let keep: Vec<String> = prices
        .symbols()
        .iter()
        .filter(|s| esg.get(s).is_some())
        .cloned()
        .collect();
    if keep.is_empty() {
        return Err(MarketDataError::EmptyIntersection);
    }
    let table = prices.select(&keep)?;
    let scores = EsgTable::new(keep.iter().map(|s| (s.clone(), esg.get(s).unwrap())))?;
    Ok((table, scores))
}

/// Computes daily simple returns `p[t+1]/p[t] - 1` with their sample mean
/// and sample covariance (denominator n-1). With a single return
/// observation the covariance is the zero matrix.
pub fn compute_returns(prices: &PriceTable) -> Result<ReturnsPanel, MarketDataError> {
    let t = prices.num_dates();
    if t < 2 {
        return Err(MarketDataError::TooFewDates(t));
    }
    let n = prices.num_symbols();
    let n_obs = t - 1;
    let p = prices.prices();

    let mut returns = Array2::zeros((n, n_obs));
    for i in 0..n {
        for k in 0..n_obs {
            returns[[i, k]] = p[[i, k + 1]] / p[[i, k]] - 1.0;
        }
    }
    let mut mean_daily = Array1::zeros(n);
    for i in 0..n {
        mean_daily[i] = returns.row(i).sum() / n_obs as f64;
    }
    let mut cov_daily = Array2::zeros((n, n));
    if n_obs >= 2 {
        let denom = (n_obs - 1) as f64;
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n_obs {
                    acc += (returns[[i, k]] - mean_daily[i]) * (returns[[j, k]] - mean_daily[j]);
                }
                let c = acc / denom;
                cov_daily[[i, j]] = c;
                cov_daily[[j, i]] = c;
            }
        }
    }
    Ok(ReturnsPanel {
        symbols: prices.symbols().to_vec(),
        dates: prices.dates()[1..].to_vec(),
        returns,
        mean_daily,
        cov_daily,
    })
}
