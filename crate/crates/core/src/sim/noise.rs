use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Gaussian i.i.d. noise whose variance scales with the path's volatility:
/// `omega^2 = gamma^2 sqrt(mean(sigma^4))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub gamma_sq: f64,
}

impl NoiseConfig {
    pub fn new(gamma_sq: f64) -> Result<Self> {
        if !(gamma_sq >= 0.0 && gamma_sq.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma^2 must be >= 0, got {gamma_sq}")));
        }
        Ok(Self { gamma_sq })
    }

    /// `omega^2` of one asset from its volatility path `sigma_0 .. sigma_N`,
    /// averaging `sigma^4` over `j = 1..=N`.
    pub fn omega_sq(&self, sigma: &[f64]) -> f64 {
        let n = sigma.len() - 1;
        let m4 = sigma[1..].iter().map(|s| s.powi(4)).sum::<f64>() / n as f64;
        self.gamma_sq * m4.sqrt()
    }
}

/// Noisy prices `Y = X + eps` and the diagonal noise covariance used.
/// `rngs[k]` draws asset `k`'s noise.
pub fn add_noise<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    noise: &NoiseConfig,
    rngs: &mut [&mut R],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if x.shape() != sigma.shape() {
        return Err(Error::InvalidConfig("price and volatility paths differ in shape".into()));
    }
    let d = x.ncols();
    if rngs.len() != d {
        return Err(Error::InvalidConfig(format!("{} noise streams for {d} assets", rngs.len())));
    }
    let mut y = x.clone();
    let mut psi = DMatrix::zeros(d, d);
    for k in 0..d {
        let omega_sq = noise.omega_sq(sigma.column(k).as_slice());
        psi[(k, k)] = omega_sq;
        if omega_sq == 0.0 {
            continue;
        }
        let omega = omega_sq.sqrt();
        for j in 0..y.nrows() {
            let e: f64 = rngs[k].sample(StandardNormal);
            y[(j, k)] += omega * e;
        }
    }
    Ok((y, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gamma_is_exact() {
        let x = DMatrix::from_fn(50, 1, |i, _| i as f64);
        let s = DMatrix::from_element(50, 1, 1.0);
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let (y, psi) = add_noise(&x, &s, &NoiseConfig::new(0.0).unwrap(), &mut [&mut r]).unwrap();
        assert_eq!(y, x);
        assert_eq!(psi[(0, 0)], 0.0);
    }

    #[test]
    fn unit_volatility_gives_gamma() {
        assert_eq!(NoiseConfig::new(0.01).unwrap().omega_sq(&[1.0; 100]), 0.01);
        assert!(NoiseConfig::new(-1.0).is_err());
    }

    #[test]
    fn sample_variance_matches() {
        let n = 23_401;
        let x = DMatrix::zeros(n, 1);
        let s = DMatrix::from_element(n, 1, 1.0);
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let (y, psi) = add_noise(&x, &s, &NoiseConfig::new(0.01).unwrap(), &mut [&mut r]).unwrap();
        let v = y.iter().map(|e| e * e).sum::<f64>() / n as f64;
        assert!((v / psi[(0, 0)] - 1.0).abs() < 0.05);
    }
}
