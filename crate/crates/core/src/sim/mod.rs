//! Monte Carlo laboratory: a stochastic-volatility factor model with
//! Ornstein-Uhlenbeck log-volatility, heteroscedastic noise, Poisson
//! sampling, the true asymptotic covariance, and an estimator bake-off.

mod mc;
mod model;
mod noise;
mod oracle;
mod sampling;

pub use mc::{
    rep_errors, run_monte_carlo, simulate_rep, stream, ErrorStats, McCell, McEstimator, McScenarioResult,
    McSummary, Purpose, RepData, RepErrors, Sampling, Scenario, SESSION_SECONDS,
};
pub use model::{simulate_paths, simulate_varrho, AssetParams, SimPaths, SvModelConfig};
pub use noise::{add_noise, NoiseConfig};
pub use oracle::{lambda_array, theta_array, true_avar, TrueAvarOracle};
pub use sampling::{poisson_sample, poisson_times};
