use std::fmt;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use statrs::distribution::{ContinuousCDF, Normal};

use super::avar::AvarEstimate;
use crate::error::{Error, Result};
use crate::types::CovEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticKind {
    Covariance,
    Beta,
    Correlation,
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatisticKind::Covariance => "covariance",
            StatisticKind::Beta => "beta",
            StatisticKind::Correlation => "correlation",
        })
    }
}

/// `point +/- half_width`. An interval whose estimated variance came out
/// negative is kept with `valid = false` and zero width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfInterval {
    pub kind: StatisticKind,
    pub i: usize,
    pub j: usize,
    pub point: f64,
    pub half_width: f64,
    pub level: f64,
    /// Estimated asymptotic variance of the studentised statistic.
    pub variance: f64,
    pub valid: bool,
}

impl ConfInterval {
    pub fn lower(&self) -> f64 {
        self.point - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.point + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.valid && self.lower() <= x && x <= self.upper()
    }
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {level}")));
    }
    let z = Normal::standard();
    Ok(z.inverse_cdf(0.5 + level / 2.0))
}

fn check(est: &CovEstimate, avar: &AvarEstimate, i: usize, j: usize) -> Result<usize> {
    let d = est.dim();
    if avar.matrix.nrows() != d * d {
        return Err(Error::InvalidConfig(format!(
            "avar is {}x{} but the estimate has d={d}",
            avar.matrix.nrows(),
            avar.matrix.ncols()
        )));
    }
    if i >= d || j >= d {
        return Err(Error::InvalidConfig(format!("index ({i}, {j}) out of range")));
    }
    Ok(d)
}

fn finish(kind: StatisticKind, est: &CovEstimate, i: usize, j: usize, point: f64, variance: f64, level: f64) -> Result<ConfInterval> {
    let z = normal_quantile(level)?;
    let valid = variance >= 0.0 && variance.is_finite();
    let half_width = if valid {
        z * (est.n_used as f64).powf(-0.25) * variance.sqrt()
    } else {
        0.0
    };
    Ok(ConfInterval {
        kind,
        i,
        j,
        point,
        half_width,
        level,
        variance,
        valid,
    })
}

/// Interval for `int Sigma^{ij}`.
pub fn ci_cov(est: &CovEstimate, avar: &AvarEstimate, i: usize, j: usize, level: f64) -> Result<ConfInterval> {
    let d = check(est, avar, i, j)?;
    let a = i * d + j;
    let var = avar.matrix[(a, a)];
    finish(StatisticKind::Covariance, est, i, j, est.matrix[(i, j)], var, level)
}

/// Interval for the regression coefficient `Sigma^{ij} / Sigma^{ii}`.
pub fn ci_beta(est: &CovEstimate, avar: &AvarEstimate, i: usize, j: usize, level: f64) -> Result<ConfInterval> {
    let d = check(est, avar, i, j)?;
    let m = &est.matrix;
    if !(m[(i, i)] > 0.0) {
        return Err(Error::NonPositiveVariance { index: i });
    }
    let beta = m[(i, j)] / m[(i, i)];
    let (ij, ii) = (i * d + j, i * d + i);
    let gamma = Matrix2::new(
        avar.matrix[(ij, ij)],
        avar.matrix[(ij, ii)],
        avar.matrix[(ii, ij)],
        avar.matrix[(ii, ii)],
    );
    let v = Vector2::new(1.0, -beta);
    let g = v.dot(&(gamma * v));
    finish(StatisticKind::Beta, est, i, j, beta, g / (m[(i, i)] * m[(i, i)]), level)
}

/// Interval for the correlation `Sigma^{ij} / sqrt(Sigma^{ii} Sigma^{jj})`.
pub fn ci_corr(est: &CovEstimate, avar: &AvarEstimate, i: usize, j: usize, level: f64) -> Result<ConfInterval> {
    let d = check(est, avar, i, j)?;
    let m = &est.matrix;
    for k in [i, j] {
        if !(m[(k, k)] > 0.0) {
            return Err(Error::NonPositiveVariance { index: k });
        }
    }
    let rho = m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt();
    let beta_ji = m[(i, j)] / m[(i, i)];
    let beta_ij = m[(i, j)] / m[(j, j)];
    // Order of the three statistics: (ii, ij, jj).
    let idx = [i * d + i, i * d + j, j * d + j];
    let gamma = Matrix3::from_fn(|r, c| avar.matrix[(idx[r], idx[c])]);
    let v = Vector3::new(-0.5 * beta_ji, 1.0, -0.5 * beta_ij);
    let h = v.dot(&(gamma * v));
    finish(StatisticKind::Correlation, est, i, j, rho, h / (m[(i, i)] * m[(j, j)]), level)
}
