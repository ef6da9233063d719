//! Deterministic synthetic market generator.
//!
//! Produces a rectangular price panel plus ESG scores for fixtures, demos
//! and large-scale tests. Prices follow lognormal walks tied to one common
//! factor so the covariance structure is realistic; roughly one ticker in
//! seven carries a zero ESG score, mirroring how laggards show up in real
//! rating files. Output depends only on the arguments.

use chrono::NaiveDate;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market_data::{next_trading_days, EsgTable, PriceTable};
use crate::rng::mix_seed;

/// Standard normal draw via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Builds `n_etfs` series over `n_days` business days starting at the first
/// business day on or after `start`, with matching ESG scores. Tickers are
/// `ETF0001`, `ETF0002`, ...
pub fn synthetic_market(
    n_etfs: usize,
    n_days: usize,
    start: NaiveDate,
    seed: u64,
) -> (PriceTable, EsgTable) {
    assert!(n_etfs > 0 && n_days > 0, "market must be non-empty");
    let dates = next_trading_days(start.pred_opt().expect("valid date"), n_days);

    // One market-wide shock series shared by all tickers.
    let mut factor_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
    let factor: Vec<f64> = (0..n_days).map(|_| normal(&mut factor_rng)).collect();

    let mut prices = Array2::zeros((n_etfs, n_days));
    let mut esg_entries = Vec::with_capacity(n_etfs);
    for i in 0..n_etfs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1 + i as u64));
        let drift = -0.05 + 0.35 * rng.random::<f64>(); // annual, in [-5%, 30%]
        let vol = 0.08 + 0.32 * rng.random::<f64>(); // annual, in [8%, 40%]
        let beta = 0.7 * rng.random::<f64>(); // loading on the common factor
        let mut price = 10.0 + 290.0 * rng.random::<f64>();

        let idio = (1.0 - beta * beta).sqrt();
        let daily_drift = (drift - 0.5 * vol * vol) / 252.0;
        let daily_vol = vol / 252f64.sqrt();
        for (k, f) in factor.iter().enumerate() {
            let shock = beta * f + idio * normal(&mut rng);
            price *= (daily_drift + daily_vol * shock).exp();
            prices[[i, k]] = price;
        }

        let score = if rng.random::<f64>() < 0.15 {
            0.0
        } else {
            (rng.random::<f64>() * 1000.0).round() / 100.0
        };
        esg_entries.push((format!("ETF{:04}", i + 1), score));
    }

    let symbols: Vec<String> = esg_entries.iter().map(|(t, _)| t.clone()).collect();
    let table = PriceTable::new(symbols, dates, prices).expect("generated panel is valid");
    let esg = EsgTable::new(esg_entries).expect("generated scores are valid");
    (table, esg)
}
