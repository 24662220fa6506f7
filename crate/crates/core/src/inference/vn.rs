use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::preavg::{preaveraged_returns, WeightScheme};
use crate::types::{log_returns, SyncedPanel};

/// `vec(Ybar_i Ybar_i')` for every pre-averaged row, one row per `i`.
/// Column `k * d + l` holds `Ybar_i^k Ybar_i^l`.
pub(crate) fn chi_rows(panel: &SyncedPanel, kn: usize, scheme: &WeightScheme) -> Result<DMatrix<f64>> {
    let y = preaveraged_returns(&log_returns(panel), kn, scheme)?;
    let d = y.ncols();
    Ok(DMatrix::from_fn(y.nrows(), d * d, |i, c| y[(i, c / d)] * y[(i, c % d)]))
}

/// `sum chi_i chi_i' - 1/2 sum (chi_i chi_{i+kn}' + chi_{i+kn} chi_i')`.
///
/// Entry `(k d + k', l d + l')` estimates a mixture of the integrated
/// fourth-moment arrays at index `(kk', ll')`. Not guaranteed PSD.
pub fn v_n(panel: &SyncedPanel, kn: usize, scheme: &WeightScheme) -> Result<DMatrix<f64>> {
    let n = panel.n();
    if kn < 2 || n < 2 * kn {
        return Err(Error::WindowOutOfRange { kn, n });
    }
    let x = chi_rows(panel, kn, scheme)?;
    let lagged = n - 2 * kn + 2;
    let head = x.rows(0, lagged);
    let tail = x.rows(kn, lagged);
    let cross = head.tr_mul(&tail);
    let v = x.tr_mul(&x) - (&cross + cross.transpose()) * 0.5;
    Ok(crate::types::symmetrize(v))
}
