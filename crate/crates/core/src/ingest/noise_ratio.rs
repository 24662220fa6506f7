use crate::error::{Error, Result};
use crate::sync::{previous_tick, SyncSpec};
use crate::types::TickSeries;

/// Noise-to-signal diagnostic `sqrt(n omega^2 / IV)`.
///
/// `omega^2` comes from the full-frequency noise estimate with its
/// `IV / 2n` signal contribution removed, and `IV` from realised variance
/// on a previous-tick grid of `sparse_n` intervals. Noise-free data give
/// values near zero.
pub fn noise_ratio(series: &TickSeries, sparse_n: usize) -> Result<f64> {
    if sparse_n < 2 || series.len() <= sparse_n {
        return Err(Error::InvalidConfig(format!(
            "noise ratio needs {} ticks > sparse_n = {sparse_n} >= 2",
            series.len()
        )));
    }
    let r = series.returns();
    let n = r.len() as f64;
    let omega_sq_raw = r.iter().map(|x| x * x).sum::<f64>() / (2.0 * n);
    let panel = previous_tick(std::slice::from_ref(series), &SyncSpec::calendar(sparse_n))?;
    let p = panel.log_prices();
    let iv: f64 = (1..p.nrows()).map(|i| (p[(i, 0)] - p[(i - 1, 0)]).powi(2)).sum();
    if !(iv > 0.0) {
        return Err(Error::InsufficientData("sparse realised variance is zero".into()));
    }
    let signal_free = (n * omega_sq_raw - 0.5 * iv).max(0.0);
    Ok((signal_free / iv).sqrt())
}
