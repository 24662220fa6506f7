use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One asset of the factor model
/// `dX = a dt + rho sigma dB + sqrt(1 - rho^2) sigma dW`,
/// `sigma = exp(beta0 + beta1 varrho)`, `d varrho = alpha varrho dt + dB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetParams {
    pub drift: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl AssetParams {
    /// `(0.03, -5/16, 1/8, -1/40, -0.3)`; `E[sigma^2] = 1` under the stationary law.
    pub fn standard() -> Self {
        Self {
            drift: 0.03,
            beta0: -5.0 / 16.0,
            beta1: 1.0 / 8.0,
            alpha: -1.0 / 40.0,
            rho: -0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be negative, got {}",
                self.alpha
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if ![self.drift, self.beta0, self.beta1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite model parameter".into()));
        }
        Ok(())
    }

    /// Variance of the stationary law of `varrho`, `1 / (-2 alpha)`.
    pub fn stationary_variance(&self) -> f64 {
        -0.5 / self.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvModelConfig {
    pub assets: Vec<AssetParams>,
    /// Number of Euler steps over the session.
    pub grid_n: usize,
}

impl SvModelConfig {
    /// Two identical assets on a one-second grid over 6.5 hours.
    pub fn standard() -> Self {
        Self {
            assets: vec![AssetParams::standard(); 2],
            grid_n: 23_400,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            return Err(Error::InvalidConfig("model has no assets".into()));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidConfig("grid needs at least 2 steps".into()));
        }
        self.assets.iter().try_for_each(AssetParams::validate)
    }

    pub fn dim(&self) -> usize {
        self.assets.len()
    }
}

/// Exact OU path `varrho_0 .. varrho_N` on the grid `j / N`, started from
/// the stationary law. Also returns the standard normal innovations
/// `Z_1 .. Z_N`, which drive the idiosyncratic price shocks.
pub fn simulate_varrho<R: Rng + ?Sized>(params: &AssetParams, grid_n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    Ok(ou_path(params.alpha, 1.0 / grid_n as f64, grid_n, rng))
}

/// Exact OU recursion `v' = e^{a dt} v + sqrt((e^{2 a dt} - 1) / (2a)) Z`
/// from a stationary start.
fn ou_path<R: Rng + ?Sized>(alpha: f64, dt: f64, steps: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let decay = (alpha * dt).exp();
    let scale = (((2.0 * alpha * dt).exp() - 1.0) / (2.0 * alpha)).sqrt();
    let mut path = Vec::with_capacity(steps + 1);
    let mut shocks = Vec::with_capacity(steps);
    let z0: f64 = rng.sample(StandardNormal);
    path.push(z0 * (-0.5 / alpha).sqrt());
    for j in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        path.push(decay * path[j] + scale * z);
        shocks.push(z);
    }
    (path, shocks)
}

/// Efficient prices, volatilities and the integrated covariance of one path.
#[derive(Debug, Clone)]
pub struct SimPaths {
    /// `(N + 1) x d` efficient log-prices.
    pub x: DMatrix<f64>,
    /// `(N + 1) x d` spot volatilities.
    pub sigma: DMatrix<f64>,
    /// Left-point Riemann sum of the spot covariance.
    pub true_cov: DMatrix<f64>,
    /// Idiosyncratic loadings, needed to rebuild the spot covariance.
    pub rho: Vec<f64>,
}

impl SimPaths {
    pub fn grid_n(&self) -> usize {
        self.x.nrows() - 1
    }

    /// Spot covariance at grid index `j`.
    pub fn spot_cov(&self, j: usize) -> DMatrix<f64> {
        spot_cov(&self.rho, |k| self.sigma[(j, k)])
    }
}

pub(crate) fn spot_cov(rho: &[f64], sigma: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let d = rho.len();
    DMatrix::from_fn(d, d, |k, l| {
        let load = if k == l {
            1.0
        } else {
            (1.0 - rho[k] * rho[k]).sqrt() * (1.0 - rho[l] * rho[l]).sqrt()
        };
        load * sigma(k) * sigma(l)
    })
}

/// Euler paths of the factor model. `vol_rngs[k]` drives asset `k`'s
/// volatility and idiosyncratic shock; `factor_rng` drives the common factor.
pub fn simulate_paths<R: Rng + ?Sized, F: Rng + ?Sized>(
    config: &SvModelConfig,
    vol_rngs: &mut [&mut R],
    factor_rng: &mut F,
) -> Result<SimPaths> {
    config.validate()?;
    let d = config.dim();
    if vol_rngs.len() != d {
        return Err(Error::InvalidConfig(format!(
            "{} volatility streams for {d} assets",
            vol_rngs.len()
        )));
    }
    let n = config.grid_n;
    let dt = 1.0 / n as f64;
    let sdt = dt.sqrt();
    let w: Vec<f64> = (0..n).map(|_| factor_rng.sample::<f64, _>(StandardNormal)).collect();

    let mut x = DMatrix::zeros(n + 1, d);
    let mut sigma = DMatrix::zeros(n + 1, d);
    for (k, p) in config.assets.iter().enumerate() {
        let (varrho, z) = simulate_varrho(p, n, &mut *vol_rngs[k])?;
        let common = (1.0 - p.rho * p.rho).sqrt();
        for j in 0..=n {
            sigma[(j, k)] = (p.beta0 + p.beta1 * varrho[j]).exp();
        }
        for j in 0..n {
            let s = sigma[(j, k)];
            x[(j + 1, k)] = x[(j, k)] + p.drift * dt + s * sdt * (p.rho * z[j] + common * w[j]);
        }
    }
    let rho: Vec<f64> = config.assets.iter().map(|p| p.rho).collect();
    let mut true_cov = DMatrix::zeros(d, d);
    for j in 0..n {
        true_cov += spot_cov(&rho, |k| sigma[(j, k)]);
    }
    true_cov /= n as f64;
    Ok(SimPaths {
        x,
        sigma,
        true_cov,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_variance_of_standard_model() {
        let p = AssetParams::standard();
        assert_eq!(p.stationary_variance(), 20.0);
        // beta0 = beta1^2 / (2 alpha)
        assert!((p.beta0 - p.beta1 * p.beta1 / (2.0 * p.alpha)).abs() < 1e-15);
    }

    #[test]
    fn rejects_explosive_ou() {
        let p = AssetParams {
            alpha: 0.1,
            ..AssetParams::standard()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate_varrho(&p, 10, &mut rng).is_err());
    }

    #[test]
    fn long_run_variance() {
        // Over one session the volatility factor barely moves, so the
        // stationary law is checked on a long horizon with unit steps.
        let p = AssetParams::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (path, _) = ou_path(p.alpha, 1.0, 400_000, &mut rng);
        let m = path.iter().sum::<f64>() / path.len() as f64;
        let v = path.iter().map(|x| (x - m).powi(2)).sum::<f64>() / path.len() as f64;
        let target = p.stationary_variance();
        assert!((v / target - 1.0).abs() < 0.05, "{v} vs {target}");
    }

    #[test]
    fn exact_step_close_to_euler_for_small_steps() {
        let a: f64 = -1.0 / 40.0;
        let dt: f64 = 1e-6;
        let scale = (((2.0 * a * dt).exp() - 1.0) / (2.0 * a)).sqrt();
        assert!((scale - dt.sqrt()).abs() < dt);
        assert!(((a * dt).exp() - (1.0 + a * dt)).abs() < dt * dt);
    }

    #[test]
    fn constant_volatility_when_beta1_zero() {
        let p = AssetParams {
            beta1: 0.0,
            beta0: 0.0,
            ..AssetParams::standard()
        };
        let cfg = SvModelConfig {
            assets: vec![p; 2],
            grid_n: 500,
        };
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        let mut f = ChaCha8Rng::seed_from_u64(3);
        let paths = simulate_paths(&cfg, &mut [&mut a, &mut b], &mut f).unwrap();
        assert!((paths.true_cov[(0, 0)] - 1.0).abs() < 1e-12);
        let corr = paths.true_cov[(0, 1)] / paths.true_cov[(0, 0)];
        assert!((corr - 0.91).abs() < 1e-12);
    }
}
