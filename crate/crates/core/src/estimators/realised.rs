use nalgebra::DMatrix;

use crate::types::{log_returns, CovEstimate, NoiseCovEstimate, SyncedPanel};

/// Sum of outer products of the panel's returns.
pub fn realised_cov(panel: &SyncedPanel) -> CovEstimate {
    let r = log_returns(panel);
    let mut est = CovEstimate::new(r.tr_mul(&r), "rv", panel.n());
    est.sync = Some(panel.scheme());
    est.psd_guaranteed = true;
    est
}

/// Noise covariance estimate `(1 / 2n) sum r_i r_i'`.
pub fn noise_cov(panel: &SyncedPanel) -> NoiseCovEstimate {
    let r = log_returns(panel);
    NoiseCovEstimate {
        matrix: noise_cov_from_returns(&r),
        n_used: panel.n(),
    }
}

pub(crate) fn noise_cov_from_returns(r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.nrows() as f64;
    crate::types::symmetrize(r.tr_mul(r) / (2.0 * n))
}
