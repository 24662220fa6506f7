use mrcov::estimators::{hy_preavg, mrc_balanced, mrc_psd, realised_cov};
use mrcov::inference::{build_weight_triple, v_n, avar_coefficients};
use mrcov::ingest::{clean_quotes_report, clean_trades_report, CleaningConfig, QuoteRecord, Rule, TradeRecord};
use mrcov::io::{read_series, write_series};
use mrcov::sim::ErrorStats;
use mrcov::sync::{refresh_time, previous_tick, SyncSpec};
use mrcov::{finite_sample_constants, PreAvgConfig, SyncedPanel, TickSeries, WeightScheme};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn panel_strategy(max_d: usize) -> impl Strategy<Value = SyncedPanel> {
    (1..=max_d, 12usize..120).prop_flat_map(|(d, n)| {
        proptest::collection::vec(-1.0f64..1.0, (n + 1) * d).prop_map(move |v| {
            let m = DMatrix::from_row_slice(n + 1, d, &v);
            SyncedPanel::equidistant(m).unwrap()
        })
    })
}

fn series_strategy(id: &'static str, max_n: usize) -> impl Strategy<Value = TickSeries> {
    proptest::collection::btree_set(0u32..10_000, 3..max_n).prop_flat_map(move |ts| {
        let n = ts.len();
        proptest::collection::vec(-1.0f64..1.0, n).prop_map(move |p| {
            let t = ts.iter().map(|&x| x as f64 / 10_000.0).collect();
            TickSeries::new(id, t, p).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_variant_is_positive_semidefinite(p in panel_strategy(4), theta in 0.2f64..2.0, delta in 0.05f64..0.45) {
        let e = mrc_psd(&p, &PreAvgConfig::with_delta(theta, delta), &WeightScheme::min());
        if let Ok(e) = e {
            prop_assert!(e.min_eigenvalue() >= -1e-12 * e.matrix.trace().abs().max(1e-300));
        }
    }

    #[test]
    fn realised_covariance_is_positive_semidefinite(p in panel_strategy(4)) {
        let e = realised_cov(&p);
        prop_assert!(e.min_eigenvalue() >= -1e-12 * e.matrix.trace());
    }

    #[test]
    fn off_diagonal_polarises(p in panel_strategy(2).prop_filter("two assets", |p| p.dim() == 2), theta in 0.3f64..1.5) {
        let cfg = PreAvgConfig::balanced(theta);
        let g = WeightScheme::min();
        let y = p.log_prices();
        let sum = SyncedPanel::equidistant(DMatrix::from_fn(y.nrows(), 1, |i, _| y[(i, 0)] + y[(i, 1)])).unwrap();
        let diff = SyncedPanel::equidistant(DMatrix::from_fn(y.nrows(), 1, |i, _| y[(i, 0)] - y[(i, 1)])).unwrap();
        if let (Ok(m), Ok(a), Ok(b)) = (mrc_balanced(&p, &cfg, &g), mrc_balanced(&sum, &cfg, &g), mrc_balanced(&diff, &cfg, &g)) {
            let pol = 0.25 * (a.matrix[(0, 0)] - b.matrix[(0, 0)]);
            let scale = a.matrix[(0, 0)].abs() + b.matrix[(0, 0)].abs() + 1e-300;
            prop_assert!((m.matrix[(0, 1)] - pol).abs() <= 1e-10 * scale, "{} vs {} (scale {})", m.matrix[(0, 1)], pol, scale);
        }
    }

    #[test]
    fn estimates_are_symmetric(p in panel_strategy(4)) {
        if let Ok(e) = mrc_balanced(&p, &PreAvgConfig::balanced(1.0), &WeightScheme::min()) {
            prop_assert_eq!(e.matrix.clone(), e.matrix.transpose());
        }
    }

    #[test]
    fn v_n_symmetric_and_relabelling_invariant(p in panel_strategy(3).prop_filter("two or more assets", |p| p.dim() >= 2)) {
        let d = p.dim();
        let kn = 3;
        prop_assume!(p.n() >= 2 * kn);
        let g = WeightScheme::sine(1).unwrap();
        let v = v_n(&p, kn, &g).unwrap();
        prop_assert!((&v - v.transpose()).amax() <= 1e-14 * v.amax().max(1e-300));
        // Swap the first two assets.
        let y = p.log_prices();
        let perm = |k: usize| if k == 0 { 1 } else if k == 1 { 0 } else { k };
        let q = SyncedPanel::equidistant(DMatrix::from_fn(y.nrows(), d, |i, k| y[(i, perm(k))])).unwrap();
        let w = v_n(&q, kn, &g).unwrap();
        let idx = |a: usize| perm(a / d) * d + perm(a % d);
        for a in 0..d * d {
            for b in 0..d * d {
                prop_assert!((w[(a, b)] - v[(idx(a), idx(b))]).abs() <= 1e-12 * v.amax().max(1e-300));
            }
        }
    }

    #[test]
    fn hy_sweep_matches_double_loop(a in series_strategy("a", 40), b in series_strategy("b", 40), kn in 2usize..6) {
        prop_assume!(a.len() >= kn && b.len() >= kn);
        let g = WeightScheme::min();
        let fast = hy_preavg(&[a.clone(), b.clone()], &PreAvgConfig::balanced(1.0).with_kn(kn), &g).unwrap().matrix[(0, 1)];
        let w = finite_sample_constants(&g, kn).unwrap();
        let pre = |s: &TickSeries| {
            let (t, p) = (s.times(), s.log_prices());
            let m = t.len() - 1;
            (0..=(m + 1 - kn)).map(|i| {
                let mut acc = 0.0;
                for j in 1..kn {
                    acc += w.weights[j] * (p[i + j] - p[i + j - 1]);
                }
                (t[i], t[(i + kn).min(m)], acc)
            }).collect::<Vec<_>>()
        };
        let mut acc = 0.0;
        for (la, ha, x) in pre(&a) {
            for (lb, hb, y) in pre(&b) {
                if la < hb && lb < ha {
                    acc += x * y;
                }
            }
        }
        let norm = w.psi_hy * kn as f64;
        prop_assert_eq!(fast, acc / (norm * norm));
    }

    #[test]
    fn refresh_time_grid_sees_every_asset(a in series_strategy("a", 60), b in series_strategy("b", 60)) {
        if let Ok(p) = refresh_time(&[a.clone(), b.clone()]) {
            let g = p.grid_times();
            prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
            for s in [&a, &b] {
                for w in g.windows(2) {
                    prop_assert!(s.times().iter().any(|&t| t > w[0] && t <= w[1]));
                }
            }
        }
    }

    #[test]
    fn previous_tick_uses_last_observed_price(a in series_strategy("a", 60), n in 2usize..50) {
        if let Ok(p) = previous_tick(std::slice::from_ref(&a), &SyncSpec::calendar(n)) {
            for (i, &t) in p.grid_times().iter().enumerate() {
                prop_assert_eq!(Some(p.log_prices()[(i, 0)]), a.price_at_or_before(t + 1e-12));
            }
        }
    }

    #[test]
    fn series_text_round_trip(a in series_strategy("a", 80)) {
        let mut buf = Vec::new();
        write_series(&mut buf, &a).unwrap();
        prop_assert_eq!(read_series(buf.as_slice(), "a").unwrap(), a);
    }

    #[test]
    fn rmse_dominates_bias(e in proptest::collection::vec(-10.0f64..10.0, 1..50)) {
        let s = ErrorStats::from_errors(e.into_iter());
        prop_assert!(s.rmse * s.rmse - s.bias * s.bias >= 0.0);
    }

    #[test]
    fn triple_combination_round_trips(c1 in 1u32..4, c2 in 4u32..8, c3 in 8u32..12, theta in 0.3f64..3.0) {
        let s = |c| WeightScheme::sine(c).unwrap();
        let t = build_weight_triple(&s(c1), &s(c2), &s(c3), theta, &WeightScheme::min()).unwrap();
        let back = t.c * t.a;
        let target = avar_coefficients(&WeightScheme::min(), theta);
        for k in 0..3 {
            prop_assert!((back[k] - target[k]).abs() <= 1e-10 * target[k].abs());
        }
    }
}

fn trade_strategy() -> impl Strategy<Value = TradeRecord> {
    (
        30_000u32..62_000,
        prop_oneof![Just(0.0), Just(-1.0), 1.0f64..100.0],
        0.0f64..5.0,
        prop_oneof![Just("N"), Just("T")],
        0i64..3,
        prop_oneof![Just(""), Just("@"), Just("Z"), Just("F")],
    )
        .prop_map(|(timestamp, price, size, exch, corr, cond)| TradeRecord {
            timestamp,
            price,
            size: size.floor(),
            exch: exch.into(),
            corr,
            cond: cond.into(),
        })
}

fn quote_strategy() -> impl Strategy<Value = QuoteRecord> {
    (30_000u32..62_000, 0.0f64..10.0, 0.0f64..12.0, 0.0f64..3.0, 0.0f64..3.0, prop_oneof![Just("N"), Just("P")]).prop_map(
        |(timestamp, bid, ask, bsize, asize, exch)| QuoteRecord {
            timestamp,
            bid,
            ask,
            bsize,
            asize,
            exch: exch.into(),
        },
    )
}

fn with_order(first: [Rule; 3], tail: &[Rule]) -> CleaningConfig {
    let mut c = CleaningConfig::new("N");
    c.rule_order = first.iter().chain(tail).copied().collect();
    c
}

const PERMUTATIONS: [[Rule; 3]; 6] = [
    [Rule::Exchange, Rule::Session, Rule::ZeroPrice],
    [Rule::Exchange, Rule::ZeroPrice, Rule::Session],
    [Rule::Session, Rule::Exchange, Rule::ZeroPrice],
    [Rule::Session, Rule::ZeroPrice, Rule::Exchange],
    [Rule::ZeroPrice, Rule::Exchange, Rule::Session],
    [Rule::ZeroPrice, Rule::Session, Rule::Exchange],
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn trade_report_balances(rows in proptest::collection::vec(trade_strategy(), 0..80)) {
        let (points, rep) = clean_trades_report(&rows, &CleaningConfig::new("N")).unwrap();
        prop_assert!(rep.balances());
        prop_assert_eq!(points.len(), rep.output);
        prop_assert!(points.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn quote_report_balances(rows in proptest::collection::vec(quote_strategy(), 0..80)) {
        let (points, rep) = clean_quotes_report(&rows, &CleaningConfig::new("N")).unwrap();
        prop_assert!(rep.balances());
        prop_assert_eq!(points.len(), rep.output);
    }

    #[test]
    fn independent_trade_rules_commute(rows in proptest::collection::vec(trade_strategy(), 0..80)) {
        let base = clean_trades_report(&rows, &with_order(PERMUTATIONS[0], &[Rule::Correction])).unwrap().0;
        for perm in &PERMUTATIONS[1..] {
            let (points, rep) = clean_trades_report(&rows, &with_order(*perm, &[Rule::Correction])).unwrap();
            prop_assert_eq!(&points, &base);
            prop_assert!(rep.balances());
        }
    }

    #[test]
    fn independent_quote_rules_commute(rows in proptest::collection::vec(quote_strategy(), 0..80)) {
        let tail = [Rule::NegativeSpread, Rule::WideSpread];
        let base = clean_quotes_report(&rows, &with_order(PERMUTATIONS[0], &tail)).unwrap();
        for perm in &PERMUTATIONS[1..] {
            let (points, rep) = clean_quotes_report(&rows, &with_order(*perm, &tail)).unwrap();
            prop_assert_eq!(&points, &base.0);
            prop_assert_eq!(rep.deleted_by(Rule::WideSpread), base.1.deleted_by(Rule::WideSpread));
        }
    }
}
