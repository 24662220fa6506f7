use crate::error::{Error, Result};
use crate::types::CovEstimate;

/// Regression coefficient and correlation of asset `j` on asset `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedStats {
    pub i: usize,
    pub j: usize,
    /// `M[i][j] / M[i][i]`.
    pub beta: f64,
    /// `M[i][j] / sqrt(M[i][i] M[j][j])`; NaN if `M[j][j] <= 0`.
    pub corr: f64,
}

fn check(est: &CovEstimate, i: usize, j: usize) -> Result<()> {
    let d = est.dim();
    if i >= d || j >= d {
        return Err(Error::InvalidConfig(format!(
            "index ({i}, {j}) out of range for a {d}x{d} estimate"
        )));
    }
    if !(est.matrix[(i, i)] > 0.0) {
        return Err(Error::NonPositiveVariance { index: i });
    }
    Ok(())
}

/// Beta of asset `j` on asset `i`. Needs a positive variance for `i`.
pub fn beta_of(est: &CovEstimate, i: usize, j: usize) -> Result<DerivedStats> {
    check(est, i, j)?;
    let m = &est.matrix;
    let var_j = m[(j, j)];
    let corr = if var_j > 0.0 {
        m[(i, j)] / (m[(i, i)] * var_j).sqrt()
    } else {
        f64::NAN
    };
    Ok(DerivedStats {
        i,
        j,
        beta: m[(i, j)] / m[(i, i)],
        corr,
    })
}

/// Correlation of assets `i` and `j`. Needs both variances positive.
pub fn corr_of(est: &CovEstimate, i: usize, j: usize) -> Result<DerivedStats> {
    check(est, i, j)?;
    if !(est.matrix[(j, j)] > 0.0) {
        return Err(Error::NonPositiveVariance { index: j });
    }
    beta_of(est, i, j)
}
