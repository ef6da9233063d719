//! Property tests for the library's structural guarantees: round trips,
//! determinism, feasibility, and the covariance spectrum. The eigenvalue
//! check uses a local Jacobi rotation oracle rather than anything from the
//! library under test.

use chrono::NaiveDate;
use esgmv::forecast::{fit_forest, make_supervised, ForestConfig, LagConfig};
use esgmv::market_data::{
    compute_returns, join_universe, parse_esg, parse_prices, EsgTable, PriceTable,
};
use esgmv::metrics::{mase, naive_denominator, scaled_error_report};
use esgmv::optimizer::{
    optimize, portfolio_stats, project_to_simplex, MarketInputs, Objective, SolverConfig,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

// ===== independent spectral oracle =====

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off <= 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]] == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

#[test]
fn jacobi_oracle_finds_known_spectrum() {
    // [[2,1],[1,2]] has eigenvalues 1 and 3.
    let m = ndarray::array![[2.0, 1.0], [1.0, 2.0]];
    let mut eig = jacobi_eigenvalues(&m);
    eig.sort_by(f64::total_cmp);
    assert!((eig[0] - 1.0).abs() < 1e-12);
    assert!((eig[1] - 3.0).abs() < 1e-12);
}

// ===== strategies =====

fn price_grid(max_sym: usize, max_days: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_sym, 2..=max_days).prop_flat_map(|(s, d)| {
        proptest::collection::vec(
            proptest::collection::vec(0.01f64..5000.0, d..=d),
            s..=s,
        )
    })
}

fn table_from_grid(grid: &[Vec<f64>]) -> PriceTable {
    let n_sym = grid.len();
    let n_days = grid[0].len();
    let symbols: Vec<String> = (0..n_sym).map(|i| format!("S{i:02}")).collect();
    let start: NaiveDate = "2015-01-05".parse().unwrap();
    let dates = esgmv::market_data::next_trading_days(start, n_days);
    let flat: Vec<f64> = grid.iter().flatten().copied().collect();
    let prices = Array2::from_shape_vec((n_sym, n_days), flat).unwrap();
    PriceTable::new(symbols, dates, prices).unwrap()
}

/// Random PSD market: covariance built as G G' scaled to daily-return size.
fn market_inputs(max_assets: usize) -> impl Strategy<Value = MarketInputs> {
    (2..=max_assets).prop_flat_map(|n| {
        (
            proptest::collection::vec(-0.10f64..0.35, n..=n),
            proptest::collection::vec(-0.2f64..0.2, (n * n)..=(n * n)),
            proptest::collection::vec(0.0f64..10.0, n..=n),
            -0.02f64..0.05,
        )
            .prop_map(move |(mu, g, esg, rf)| {
                let g = Array2::from_shape_vec((n, n), g).unwrap();
                let mut cov = Array2::zeros((n, n));
                for i in 0..n {
                    for j in i..n {
                        let v = g.row(i).dot(&g.row(j)) + if i == j { 1e-4 } else { 0.0 };
                        cov[[i, j]] = v;
                        cov[[j, i]] = v;
                    }
                }
                let symbols = (0..n).map(|i| format!("A{i:02}")).collect();
                MarketInputs::new(
                    symbols,
                    Array1::from_vec(mu),
                    cov,
                    Array1::from_vec(esg),
                    rf,
                )
                .unwrap()
            })
    })
}

// ===== market data =====

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_price_csv_round_trips(grid in price_grid(4, 20)) {
        let table = table_from_grid(&grid);
        let again = parse_prices(&table.to_canonical_csv(), None, 0.0).unwrap();
        prop_assert_eq!(table, again);
    }

    #[test]
    fn canonical_esg_csv_round_trips(scores in proptest::collection::vec(0.0f64..=10.0, 1..12)) {
        let entries: Vec<(String, f64)> =
            scores.iter().enumerate().map(|(i, &s)| (format!("T{i:02}"), s)).collect();
        let table = EsgTable::new(entries).unwrap();
        let again = parse_esg(&table.to_canonical_csv()).unwrap();
        prop_assert_eq!(table, again);
    }

    #[test]
    fn join_is_idempotent(grid in price_grid(5, 8), keep_mask in proptest::collection::vec(any::<bool>(), 5)) {
        let table = table_from_grid(&grid);
        let rated: Vec<(String, f64)> = table
            .symbols()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep_mask[*i % keep_mask.len()])
            .map(|(i, s)| (s.clone(), (i % 11) as f64))
            .collect();
        prop_assume!(!rated.is_empty());
        let esg = EsgTable::new(rated).unwrap();
        let (p1, e1) = join_universe(&table, &esg).unwrap();
        let (p2, e2) = join_universe(&p1, &e1).unwrap();
        prop_assert_eq!(&p1, &p2);
        prop_assert_eq!(&e1, &e2);
        // Everything kept is rated, and order follows the price table.
        for s in p1.symbols() {
            prop_assert!(e1.get(s).is_some());
        }
    }

    #[test]
    fn covariance_is_symmetric_and_psd(grid in price_grid(5, 25)) {
        let table = table_from_grid(&grid);
        let panel = compute_returns(&table).unwrap();
        let n = panel.symbols.len();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(panel.cov_daily[[i, j]], panel.cov_daily[[j, i]]);
            }
        }
        let scale = panel.cov_daily.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        let min_eig = jacobi_eigenvalues(&panel.cov_daily)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        prop_assert!(
            min_eig >= -1e-10 * scale,
            "min eigenvalue {} at scale {}",
            min_eig,
            scale
        );
    }

    #[test]
    fn removing_a_ticker_leaves_other_rows_alone(grid in price_grid(4, 12)) {
        let table = table_from_grid(&grid);
        prop_assume!(table.num_symbols() >= 2);
        let panel = compute_returns(&table).unwrap();
        let first = vec![table.symbols()[0].clone()];
        let sub_panel = compute_returns(&table.select(&first).unwrap()).unwrap();
        for k in 0..panel.returns.ncols() {
            prop_assert_eq!(sub_panel.returns[[0, k]], panel.returns[[0, k]]);
        }
        prop_assert_eq!(sub_panel.mean_daily[0], panel.mean_daily[0]);
        if panel.returns.ncols() >= 2 {
            prop_assert_eq!(sub_panel.cov_daily[[0, 0]], panel.cov_daily[[0, 0]]);
        }
    }
}

// ===== metrics =====

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scaled_errors_are_scale_invariant(
        train in proptest::collection::vec(1.0f64..100.0, 5..40),
        test in proptest::collection::vec(1.0f64..100.0, 1..20),
        noise in proptest::collection::vec(-5.0f64..5.0, 20),
        c in 0.001f64..1000.0,
    ) {
        prop_assume!(naive_denominator(&train).is_ok());
        let predicted: Vec<f64> = test.iter().zip(&noise).map(|(a, n)| a + n).collect();
        let r1 = scaled_error_report(&test, &predicted, &train).unwrap();
        let scale = |xs: &[f64]| xs.iter().map(|x| x * c).collect::<Vec<_>>();
        let r2 = scaled_error_report(&scale(&test), &scale(&predicted), &scale(&train)).unwrap();
        prop_assert!((r1.mase - r2.mase).abs() <= 1e-9 * (1.0 + r1.mase));
        prop_assert!((r1.rmsse - r2.rmsse).abs() <= 1e-9 * (1.0 + r1.rmsse));
        // Quadratic mean dominates the absolute mean.
        prop_assert!(r1.rmsse >= r1.mase - 1e-12);
    }

    #[test]
    fn repeating_yesterday_scores_exactly_one(
        train in proptest::collection::vec(1.0f64..100.0, 3..50),
    ) {
        prop_assume!(naive_denominator(&train).is_ok());
        let actual = &train[1..];
        let predicted = &train[..train.len() - 1];
        let m = mase(actual, predicted, &train).unwrap();
        prop_assert!((m - 1.0).abs() <= 1e-12, "mase = {}", m);
    }
}

// ===== forecasting =====

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forest_fit_is_deterministic(
        series in proptest::collection::vec(5.0f64..500.0, 30..60),
        seed in any::<u64>(),
    ) {
        let lag = LagConfig { lags: 4, horizon: 3 };
        let cfg = ForestConfig { n_trees: 8, seed, ..ForestConfig::default() };
        let (x, y) = make_supervised(&series, &lag).unwrap();
        let a = fit_forest(&x, &y, &lag, &cfg).unwrap();
        let b = fit_forest(&x, &y, &lag, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let fa = a.forecast_horizon(&series, 3).unwrap();
        let fb = b.forecast_horizon(&series, 3).unwrap();
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn forecasts_stay_inside_the_training_range(
        series in proptest::collection::vec(5.0f64..500.0, 30..60),
        seed in any::<u64>(),
    ) {
        let lag = LagConfig { lags: 5, horizon: 8 };
        let cfg = ForestConfig { n_trees: 10, seed, ..ForestConfig::default() };
        let (x, y) = make_supervised(&series, &lag).unwrap();
        let model = fit_forest(&x, &y, &lag, &cfg).unwrap();
        let (lo, hi) = model.train_target_range();
        let f = model.forecast_horizon(&series, 8).unwrap();
        for step in 0..8 {
            prop_assert!(f.point_forecast[step] >= lo && f.point_forecast[step] <= hi);
            prop_assert!(f.interval_low[step] <= f.point_forecast[step]);
            prop_assert!(f.point_forecast[step] <= f.interval_high[step]);
        }
    }

    #[test]
    fn training_row_order_is_irrelevant_without_resampling(
        series in proptest::collection::vec(5.0f64..500.0, 25..40),
        perm_seed in any::<u64>(),
    ) {
        let lag = LagConfig { lags: 3, horizon: 2 };
        let cfg = ForestConfig {
            n_trees: 4,
            bootstrap: false,
            feature_fraction: 1.0,
            seed: 0,
            ..ForestConfig::default()
        };
        let (x, y) = make_supervised(&series, &lag).unwrap();
        let n = y.len();

        // Deterministic permutation of the supervised rows.
        let mut order: Vec<usize> = (0..n).collect();
        let mut state = perm_seed | 1;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            order.swap(i, j);
        }
        let mut xp = Array2::zeros((n, 3));
        let mut yp = vec![0.0; n];
        for (new, &old) in order.iter().enumerate() {
            for c in 0..3 {
                xp[[new, c]] = x[[old, c]];
            }
            yp[new] = y[old];
        }

        let a = fit_forest(&x, &y, &lag, &cfg).unwrap();
        let b = fit_forest(&xp, &yp, &lag, &cfg).unwrap();
        for probe in series.windows(3).step_by(7) {
            prop_assert_eq!(a.predict_row(probe), b.predict_row(probe));
        }
    }
}

// ===== optimization =====

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_always_lands_on_the_simplex(
        v in proptest::collection::vec(-1e4f64..1e4, 1..12),
    ) {
        let w = project_to_simplex(&Array1::from_vec(v));
        prop_assert!((w.sum() - 1.0).abs() < 1e-9);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn optimizer_output_is_feasible_and_dominates_equal_weights(
        market in market_inputs(6),
        seed in any::<u64>(),
    ) {
        let cfg = SolverConfig { seed, ..SolverConfig::default() };
        for objective in [Objective::Sharpe, Objective::EsgWeightedSharpe] {
            let p = optimize(&market, &cfg, objective).unwrap();
            let sum: f64 = p.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-8);
            prop_assert!(p.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
            // Equal weights is always a start, and ascent never loses value.
            let n = market.len();
            let equal = Array1::from_elem(n, 1.0 / n as f64);
            let base = objective.value(&equal, &market);
            prop_assert!(
                p.objective_value >= base - 1e-9 * (1.0 + base.abs()),
                "objective {} below start {}",
                p.objective_value,
                base
            );
            // Reported statistics agree with an independent evaluation.
            let stats = portfolio_stats(&p.weights, &market).unwrap();
            prop_assert!((stats.return_annual - p.return_annual).abs() < 1e-12);
            prop_assert!((stats.risk_annual - p.risk_annual).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences(
        market in market_inputs(5),
        raw in proptest::collection::vec(0.05f64..1.0, 5),
    ) {
        let n = market.len();
        let sum: f64 = raw[..n].iter().sum();
        let w = Array1::from_iter(raw[..n].iter().map(|x| x / sum));
        let h = 1e-6;
        for objective in [Objective::Sharpe, Objective::EsgWeightedSharpe] {
            let g = objective.gradient(&w, &market);
            for i in 0..n {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[i] += h;
                wm[i] -= h;
                let fd = (objective.value(&wp, &market) - objective.value(&wm, &market))
                    / (2.0 * h);
                prop_assert!(
                    (g[i] - fd).abs() <= 1e-4 * (1.0 + fd.abs()),
                    "component {}: analytic {} vs fd {}",
                    i,
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn experiment_runs_are_reproducible(market in market_inputs(8), seed in any::<u64>()) {
        use esgmv::experiment::{run_experiment, ExperimentConfig};
        prop_assume!(market.len() >= 4);
        let cfg = ExperimentConfig {
            runs: 3,
            market_size: 3,
            seed_base: seed,
            solver: SolverConfig::default(),
        };
        let a = run_experiment(&market, &cfg).unwrap();
        let b = run_experiment(&market, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
