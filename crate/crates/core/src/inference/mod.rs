//! Feasible inference for the balanced MRC: fourth-moment statistics, the
//! weight-triple estimator of the asymptotic covariance, window selection
//! and confidence intervals for covariances, betas and correlations.

mod avar;
mod ci;
mod theta;
mod triple;
mod vn;

pub use avar::{avar_mrc, integrated_quarticity, AvarEstimate};
pub use ci::{ci_beta, ci_corr, ci_cov, normal_quantile, ConfInterval, StatisticKind};
pub use theta::{mrc_variance, theta_search, theta_star, ThetaSearch, DEFAULT_MIN_THETA};
pub use triple::{avar_coefficients, build_weight_triple, WeightTriple, MAX_CONDITION};
pub use vn::v_n;
