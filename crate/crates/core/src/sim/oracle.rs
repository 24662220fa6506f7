use nalgebra::DMatrix;

use super::model::spot_cov;
use crate::error::{Error, Result};
use crate::preavg::WeightScheme;

/// The MRC's asymptotic covariance evaluated on a known volatility path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueAvarOracle {
    pub matrix: DMatrix<f64>,
    pub int_lambda: DMatrix<f64>,
    pub int_theta: DMatrix<f64>,
    pub upsilon: DMatrix<f64>,
}

/// `Sigma^{kk'} Sigma^{ll'} + Sigma^{kl'} Sigma^{lk'}` at `(k d + l, k' d + l')`.
pub fn lambda_array(s: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    DMatrix::from_fn(d * d, d * d, |r, c| {
        let (k, l, kp, lp) = (r / d, r % d, c / d, c % d);
        s[(k, kp)] * s[(l, lp)] + s[(k, lp)] * s[(l, kp)]
    })
}

/// `Sigma^{kk'} Psi^{ll'} + Sigma^{kl'} Psi^{k'l} + Sigma^{k'l} Psi^{kl'} + Sigma^{ll'} Psi^{kk'}`.
pub fn theta_array(s: &DMatrix<f64>, psi: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    DMatrix::from_fn(d * d, d * d, |r, c| {
        let (k, l, kp, lp) = (r / d, r % d, c / d, c % d);
        s[(k, kp)] * psi[(l, lp)] + s[(k, lp)] * psi[(kp, l)] + s[(kp, l)] * psi[(k, lp)] + s[(l, lp)] * psi[(k, kp)]
    })
}

/// Riemann-summed `int Lambda`, `int Theta` and `Upsilon` for a path with
/// spot volatilities `sigma` (`(N + 1) x d`) and loadings `rho`, combined as
/// `(2 / psi2^2)(Phi22 theta int Lambda + Phi12 / theta int Theta + Phi11 / theta^3 Upsilon)`.
pub fn true_avar(sigma: &DMatrix<f64>, rho: &[f64], psi: &DMatrix<f64>, theta: f64, scheme: &WeightScheme) -> Result<TrueAvarOracle> {
    let d = sigma.ncols();
    if rho.len() != d || psi.shape() != (d, d) {
        return Err(Error::InvalidConfig("oracle inputs disagree in dimension".into()));
    }
    if sigma.nrows() < 2 {
        return Err(Error::InvalidConfig("volatility path too short".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidConfig(format!("theta must be positive, got {theta}")));
    }
    let n = sigma.nrows() - 1;
    let mut int_lambda = DMatrix::zeros(d * d, d * d);
    let mut int_theta = DMatrix::zeros(d * d, d * d);
    for j in 0..n {
        let s = spot_cov(rho, |k| sigma[(j, k)]);
        int_lambda += lambda_array(&s);
        int_theta += theta_array(&s, psi);
    }
    int_lambda /= n as f64;
    int_theta /= n as f64;
    let upsilon = lambda_array(psi);
    let c = scheme.constants();
    let scale = 2.0 / (c.psi2 * c.psi2);
    let matrix = (&int_lambda * (c.phi22 * theta) + &int_theta * (c.phi12 / theta) + &upsilon * (c.phi11 / theta.powi(3))) * scale;
    Ok(TrueAvarOracle {
        matrix,
        int_lambda,
        int_theta,
        upsilon,
    })
}
