//! Monte Carlo checks of estimator behaviour on simulated data.

use mrcov::estimators::{hy_preavg, mrc_psd};
use mrcov::inference::{avar_mrc, integrated_quarticity, WeightTriple};
use mrcov::ingest::noise_ratio;
use mrcov::sim::{run_monte_carlo, McEstimator, Scenario, SvModelConfig};
use mrcov::sync::SyncSpec;
use mrcov::{PreAvgConfig, SyncedPanel, TickSeries, WeightScheme};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn brownian(rng: &mut ChaCha8Rng, n: usize, noise: f64) -> Vec<f64> {
    let mut x = 0.0;
    (0..=n)
        .map(|i| {
            if i > 0 {
                x += rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt();
            }
            x + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

#[test]
fn noise_ratio_separates_noise_from_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 23_400;
    let clean = TickSeries::new("x", grid(n), brownian(&mut rng, n, 0.0)).unwrap();
    let g = noise_ratio(&clean, 390).unwrap();
    assert!(g < 0.3, "noiseless ratio {g}");

    let noise: Vec<f64> = (0..=n).map(|_| 0.001 * rng.sample::<f64, _>(StandardNormal)).collect();
    let pure = TickSeries::new("e", grid(n), noise).unwrap();
    let g = noise_ratio(&pure, 390).unwrap();
    assert!(g > 5.0, "pure-noise ratio {g}");
}

#[test]
fn no_noise_full_grid_efficiency_ordering() {
    let est = [
        McEstimator::CalendarRc { calendar_n: 23_400 },
        McEstimator::Mrc {
            sync: SyncSpec::refresh_time(),
            theta: 1.0,
        },
    ];
    let s = run_monte_carlo(&SvModelConfig::standard(), &[Scenario::full_grid(0.0)], &est, &WeightScheme::min(), 100, 3).unwrap();
    let rv = s.cell(0, "rc@cal23400").unwrap().cov;
    let mrc = s.cell(0, "mrc").unwrap().cov;
    assert!(rv.bias.abs() <= 3.0 * rv.bias_se(), "rv bias {} se {}", rv.bias, rv.bias_se());
    assert!(mrc.bias.abs() <= 3.0 * mrc.bias_se(), "mrc bias {} se {}", mrc.bias, mrc.bias_se());
    assert!(rv.rmse < mrc.rmse, "rv {} mrc {}", rv.rmse, mrc.rmse);
}

#[test]
fn univariate_avar_and_quarticity_for_unit_volatility() {
    let n = 23_400;
    let reps = 60;
    let triple = WeightTriple::default_triple(1.0).unwrap();
    let cfg = PreAvgConfig::balanced(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut avar, mut iq) = (0.0, 0.0);
    let mut theta = 0.0;
    for _ in 0..reps {
        let m = DMatrix::from_vec(n + 1, 1, brownian(&mut rng, n, 0.0));
        let p = SyncedPanel::equidistant(m).unwrap();
        let a = avar_mrc(&p, &cfg, &triple).unwrap();
        theta = a.theta_used;
        avar += a.matrix[(0, 0)] / reps as f64;
        iq += integrated_quarticity(&p, &cfg, &triple).unwrap().matrix[(0, 0)] / reps as f64;
    }
    let c = *WeightScheme::min().constants();
    let expect = 4.0 * c.phi22 * theta / (c.psi2 * c.psi2);
    assert!((avar / expect - 1.0).abs() < 0.1, "avar {avar} vs {expect}");
    assert!((iq / 2.0 - 1.0).abs() < 0.1, "quarticity {iq}");
}

#[test]
fn hy_preavg_diagonal_agrees_with_psd_mrc() {
    let n = 23_400;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = brownian(&mut rng, n, 0.0);
    let s = TickSeries::new("x", grid(n), p.clone()).unwrap();
    let hy = hy_preavg(std::slice::from_ref(&s), &PreAvgConfig::balanced(1.0), &WeightScheme::min()).unwrap().matrix[(0, 0)];
    let panel = SyncedPanel::equidistant(DMatrix::from_vec(n + 1, 1, p)).unwrap();
    let psd = mrc_psd(&panel, &PreAvgConfig::with_delta(1.0, 0.1), &WeightScheme::min()).unwrap().matrix[(0, 0)];
    assert!(((hy - psd) / psd).abs() < 0.1, "hy {hy} psd {psd}");
}

#[test]
fn hy_preavg_variance_rate() {
    let reps = 150;
    let mut log_n = Vec::new();
    let mut log_var = Vec::new();
    for (k, n) in [1000usize, 4000, 16_000].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let est: Vec<f64> = (0..reps)
            .map(|_| {
                let a = brownian(&mut rng, n, 0.002);
                let b = brownian(&mut rng, n, 0.002);
                // Correlation one half through a shared component.
                let b: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.75f64.sqrt() * y).collect();
                let sa = TickSeries::new("a", grid(n), a).unwrap();
                let sb = TickSeries::new("b", grid(n), b).unwrap();
                hy_preavg(&[sa, sb], &PreAvgConfig::balanced(1.0), &WeightScheme::min()).unwrap().matrix[(0, 1)]
            })
            .collect();
        let mean = est.iter().sum::<f64>() / reps as f64;
        let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        log_n.push((n as f64).ln());
        log_var.push(var.ln());
    }
    let slope = (log_var[2] - log_var[0]) / (log_n[2] - log_n[0]);
    assert!((-0.7..=-0.3).contains(&slope), "slope {slope}");
}
