use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{simulate_paths, SimPaths, SvModelConfig};
use super::noise::{add_noise, NoiseConfig};
use super::sampling::poisson_sample;
use crate::error::{Error, Result};
use crate::estimators::{hy_classic_cov, hy_preavg, mrc_balanced, mrc_psd, realised_cov};
use crate::preavg::WeightScheme;
use crate::sync::{synchronize, SyncSpec};
use crate::types::{CovEstimate, PreAvgConfig, SyncedPanel, TickSeries};

/// Length of the simulated session in seconds.
pub const SESSION_SECONDS: f64 = 23_400.0;

/// What a random stream is used for; part of its identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Volatility = 1,
    Factor = 2,
    Noise = 3,
    Sampling = 4,
}

/// Independent stream for `(rep, asset, purpose)` under `master_seed`.
/// Streams never depend on the scenario, so all scenarios and estimators
/// of a replication share their random numbers.
pub fn stream(master_seed: u64, rep: u64, asset: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((rep << 24) | ((asset & 0xffff) << 8) | purpose as u64);
    rng
}

/// How the noisy path is observed.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Independent Poisson arrivals with the given mean waiting times (seconds).
    Poisson { lambdas: Vec<f64> },
    /// Every grid point, synchronously.
    FullGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gamma_sq: f64,
    pub sampling: Sampling,
}

impl Scenario {
    pub fn poisson(gamma_sq: f64, lambdas: &[f64]) -> Self {
        Self {
            gamma_sq,
            sampling: Sampling::Poisson {
                lambdas: lambdas.to_vec(),
            },
        }
    }

    pub fn full_grid(gamma_sq: f64) -> Self {
        Self {
            gamma_sq,
            sampling: Sampling::FullGrid,
        }
    }

    pub fn lambda_label(&self) -> String {
        match &self.sampling {
            Sampling::FullGrid => "full".into(),
            Sampling::Poisson { lambdas } => lambdas
                .iter()
                .map(|l| format!("{l}"))
                .collect::<Vec<_>>()
                .join("/"),
        }
    }
}

/// One replication's data.
#[derive(Debug, Clone)]
pub struct RepData {
    pub paths: SimPaths,
    /// Noisy grid prices.
    pub y: DMatrix<f64>,
    /// Diagonal noise covariance.
    pub psi: DMatrix<f64>,
    /// Observed series, one per asset.
    pub series: Vec<TickSeries>,
}

impl RepData {
    /// The observations as a synchronous panel, when sampled on the full grid.
    pub fn full_panel(&self) -> Result<SyncedPanel> {
        SyncedPanel::equidistant(self.y.clone())
    }
}

/// Simulates replication `rep` of `scenario`.
pub fn simulate_rep(model: &SvModelConfig, scenario: &Scenario, rep: u64, master_seed: u64) -> Result<RepData> {
    let d = model.dim();
    let mut vol: Vec<ChaCha8Rng> = (0..d)
        .map(|k| stream(master_seed, rep, k as u64, Purpose::Volatility))
        .collect();
    let mut factor = stream(master_seed, rep, 0, Purpose::Factor);
    let mut refs: Vec<&mut ChaCha8Rng> = vol.iter_mut().collect();
    let paths = simulate_paths(model, &mut refs, &mut factor)?;

    let mut noise_rngs: Vec<ChaCha8Rng> = (0..d)
        .map(|k| stream(master_seed, rep, k as u64, Purpose::Noise))
        .collect();
    let mut refs: Vec<&mut ChaCha8Rng> = noise_rngs.iter_mut().collect();
    let (y, psi) = add_noise(&paths.x, &paths.sigma, &NoiseConfig::new(scenario.gamma_sq)?, &mut refs)?;

    let n = model.grid_n;
    let series = match &scenario.sampling {
        Sampling::FullGrid => {
            let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
            (0..d)
                .map(|k| TickSeries::new(format!("asset{}", k + 1), times.clone(), y.column(k).iter().copied().collect()))
                .collect::<Result<Vec<_>>>()?
        }
        Sampling::Poisson { lambdas } => {
            if lambdas.len() != d {
                return Err(Error::InvalidConfig(format!("{} intensities for {d} assets", lambdas.len())));
            }
            (0..d)
                .map(|k| {
                    let mut rng = stream(master_seed, rep, k as u64, Purpose::Sampling);
                    let path: Vec<f64> = y.column(k).iter().copied().collect();
                    poisson_sample(&format!("asset{}", k + 1), &path, SESSION_SECONDS, lambdas[k], &mut rng)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(RepData { paths, y, psi, series })
}

/// Estimators compared in the Monte Carlo study.
#[derive(Debug, Clone, PartialEq)]
pub enum McEstimator {
    /// Realised covariance on a previous-tick calendar grid with `calendar_n` intervals.
    CalendarRc { calendar_n: usize },
    Mrc { sync: SyncSpec, theta: f64 },
    MrcPsd { sync: SyncSpec, theta: f64, delta: f64 },
    HyPreavg { theta: f64 },
    HyClassic,
}

impl McEstimator {
    pub fn label(&self) -> String {
        let th = |t: &f64| if *t == 1.0 { String::new() } else { format!("(theta={t})") };
        let sy = |s: &SyncSpec| match s.calendar_n {
            Some(n) => format!("@cal{n}"),
            None => String::new(),
        };
        match self {
            McEstimator::CalendarRc { calendar_n } => format!("rc@cal{calendar_n}"),
            McEstimator::Mrc { sync, theta } => format!("mrc{}{}", sy(sync), th(theta)),
            McEstimator::MrcPsd { sync, theta, .. } => format!("mrc-psd{}{}", sy(sync), th(theta)),
            McEstimator::HyPreavg { theta } => format!("hy-preavg{}", th(theta)),
            McEstimator::HyClassic => "hy".into(),
        }
    }

    /// Parses a CLI name: `rc:N`, `mrc`, `mrc-psd`, `hy-preavg`, `hy`.
    pub fn parse(s: &str, theta: f64, delta: f64) -> Result<Self> {
        let s = s.trim();
        if let Some(n) = s.strip_prefix("rc:") {
            let calendar_n = n
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad calendar size in '{s}'")))?;
            return Ok(McEstimator::CalendarRc { calendar_n });
        }
        Ok(match s {
            "mrc" => McEstimator::Mrc {
                sync: SyncSpec::refresh_time(),
                theta,
            },
            "mrc-psd" => McEstimator::MrcPsd {
                sync: SyncSpec::refresh_time(),
                theta,
                delta,
            },
            "hy-preavg" => McEstimator::HyPreavg { theta },
            "hy" => McEstimator::HyClassic,
            _ => return Err(Error::InvalidConfig(format!("unknown estimator '{s}'"))),
        })
    }

    pub fn estimate(&self, series: &[TickSeries], scheme: &WeightScheme) -> Result<CovEstimate> {
        match self {
            McEstimator::CalendarRc { calendar_n } => {
                Ok(realised_cov(&synchronize(series, &SyncSpec::calendar(*calendar_n))?))
            }
            McEstimator::Mrc { sync, theta } => {
                mrc_balanced(&synchronize(series, sync)?, &PreAvgConfig::balanced(*theta), scheme)
            }
            McEstimator::MrcPsd { sync, theta, delta } => {
                mrc_psd(&synchronize(series, sync)?, &PreAvgConfig::with_delta(*theta, *delta), scheme)
            }
            McEstimator::HyPreavg { theta } => hy_preavg(series, &PreAvgConfig::balanced(*theta), scheme),
            McEstimator::HyClassic => hy_classic_cov(series),
        }
    }
}

/// Errors of one estimator in one replication, for assets 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepErrors {
    pub cov: f64,
    pub corr: f64,
    /// Error in the slope of asset 1 on asset 0.
    pub beta: f64,
    pub psd: bool,
}

/// Estimate-minus-truth for covariance, correlation and beta of the first two assets.
pub fn rep_errors(est: &CovEstimate, truth: &DMatrix<f64>) -> RepErrors {
    let m = &est.matrix;
    let stats = |m: &DMatrix<f64>| {
        let corr = m[(0, 1)] / (m[(0, 0)] * m[(1, 1)]).sqrt();
        (m[(0, 1)], corr, m[(0, 1)] / m[(0, 0)])
    };
    let (c, r, b) = stats(m);
    let (tc, tr, tb) = stats(truth);
    RepErrors {
        cov: c - tc,
        corr: r - tr,
        beta: b - tb,
        psd: est.is_psd(),
    }
}

/// Bias and root mean squared error over successful replications.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub bias: f64,
    pub rmse: f64,
    pub count: usize,
}

impl ErrorStats {
    pub fn from_errors(errors: impl Iterator<Item = f64>) -> Self {
        let (mut s, mut s2, mut n) = (0.0, 0.0, 0usize);
        for e in errors.filter(|e| e.is_finite()) {
            s += e;
            s2 += e * e;
            n += 1;
        }
        if n == 0 {
            return Self {
                bias: f64::NAN,
                rmse: f64::NAN,
                count: 0,
            };
        }
        let bias = s / n as f64;
        // Guard the rmse >= |bias| identity against rounding.
        let rmse = (s2 / n as f64).sqrt().max(bias.abs());
        Self { bias, rmse, count: n }
    }

    /// Standard error of the bias.
    pub fn bias_se(&self) -> f64 {
        let var = (self.rmse * self.rmse - self.bias * self.bias).max(0.0);
        (var / self.count.max(1) as f64).sqrt()
    }
}

/// Summary of one estimator in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub estimator: String,
    pub cov: ErrorStats,
    pub corr: ErrorStats,
    pub beta: ErrorStats,
    pub failures: usize,
    pub psd_failures: usize,
    /// Per-replication errors, `None` where the estimator failed.
    pub errors: Vec<Option<RepErrors>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McScenarioResult {
    pub scenario: Scenario,
    pub cells: Vec<McCell>,
    /// Mean number of observations per asset.
    pub mean_ticks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub reps: usize,
    pub master_seed: u64,
    pub scenarios: Vec<McScenarioResult>,
}

impl McSummary {
    pub fn cell(&self, scenario: usize, estimator: &str) -> Option<&McCell> {
        self.scenarios.get(scenario)?.cells.iter().find(|c| c.estimator == estimator)
    }

    /// Delimited table: one row per (panel, scenario), bias and rmse columns per estimator.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let labels: Vec<String> = self
            .scenarios
            .first()
            .map(|s| s.cells.iter().map(|c| c.estimator.clone()).collect())
            .unwrap_or_default();
        out.push_str("panel,gamma2,lambda");
        for l in &labels {
            let _ = write!(out, ",{l}_bias,{l}_rmse");
        }
        out.push('\n');
        let panels: [(&str, fn(&McCell) -> ErrorStats); 3] = [
            ("cov", |c| c.cov),
            ("corr", |c| c.corr),
            ("beta", |c| c.beta),
        ];
        for (name, pick) in panels {
            for s in &self.scenarios {
                let _ = write!(out, "{name},{},{}", s.scenario.gamma_sq, s.scenario.lambda_label());
                for c in &s.cells {
                    let st = pick(c);
                    let _ = write!(out, ",{:.6},{:.6}", st.bias, st.rmse);
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Runs every estimator on `reps` replications of every scenario.
/// Replications run in parallel; results do not depend on the schedule.
pub fn run_monte_carlo(
    model: &SvModelConfig,
    scenarios: &[Scenario],
    estimators: &[McEstimator],
    scheme: &WeightScheme,
    reps: usize,
    master_seed: u64,
) -> Result<McSummary> {
    if reps == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    model.validate()?;
    if model.dim() < 2 {
        return Err(Error::InvalidConfig("the study needs at least two assets".into()));
    }
    let mut results = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let per_rep: Vec<(Vec<Option<RepErrors>>, Vec<usize>)> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| match simulate_rep(model, scenario, rep, master_seed) {
                Ok(data) => {
                    let errs = estimators
                        .iter()
                        .map(|e| {
                            e.estimate(&data.series, scheme)
                                .ok()
                                .map(|est| rep_errors(&est, &data.paths.true_cov))
                        })
                        .collect();
                    (errs, data.series.iter().map(TickSeries::len).collect())
                }
                Err(_) => (vec![None; estimators.len()], Vec::new()),
            })
            .collect();
        let cells = estimators
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let errors: Vec<Option<RepErrors>> = per_rep.iter().map(|(v, _)| v[k]).collect();
                let ok = || errors.iter().flatten();
                McCell {
                    estimator: e.label(),
                    cov: ErrorStats::from_errors(ok().map(|r| r.cov)),
                    corr: ErrorStats::from_errors(ok().map(|r| r.corr)),
                    beta: ErrorStats::from_errors(ok().map(|r| r.beta)),
                    failures: errors.iter().filter(|r| r.is_none()).count(),
                    psd_failures: ok().filter(|r| !r.psd).count(),
                    errors,
                }
            })
            .collect();
        let d = model.dim();
        let counted: Vec<&Vec<usize>> = per_rep.iter().map(|(_, t)| t).filter(|t| !t.is_empty()).collect();
        let mean_ticks = (0..d)
            .map(|k| counted.iter().map(|t| t[k] as f64).sum::<f64>() / counted.len().max(1) as f64)
            .collect();
        results.push(McScenarioResult {
            scenario: scenario.clone(),
            cells,
            mean_ticks,
        });
    }
    Ok(McSummary {
        reps,
        master_seed,
        scenarios: results,
    })
}
