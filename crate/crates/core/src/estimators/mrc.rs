use nalgebra::DMatrix;

use super::realised::noise_cov_from_returns;
use crate::error::{Error, Result};
use crate::preavg::{preaveraged_returns, WeightScheme};
use crate::types::{log_returns, resolve_kn, CovEstimate, EstimateWarning, PreAvgConfig, SyncedPanel};

/// Resolves the window for a panel with `n` returns and checks it lies in
/// `[2, n - 1]`.
pub(crate) fn window_for(config: &PreAvgConfig, n: usize) -> Result<(usize, bool)> {
    let w = resolve_kn(config, n)?;
    if w.kn < 2 || w.kn > n - 1 {
        return Err(Error::WindowOutOfRange { kn: w.kn, n });
    }
    Ok((w.kn, w.clamped))
}

/// Pieces shared by every MRC variant at a fixed window.
pub(crate) struct MrcParts {
    /// `sum_i Ybar_i Ybar_i' / (psi2 kn)`, before the `n / (n - kn + 2)` factor.
    pub scaled_sum: DMatrix<f64>,
    /// Noise covariance estimate.
    pub psi_hat: DMatrix<f64>,
    /// `psi1 / (theta^2 psi2)` with `theta^2 = kn^2 / n`.
    pub bias_factor: f64,
}

pub(crate) fn mrc_parts(panel: &SyncedPanel, kn: usize, scheme: &WeightScheme) -> Result<MrcParts> {
    let r = log_returns(panel);
    let n = r.nrows();
    let c = scheme.finite_sample(kn)?;
    let ybar = preaveraged_returns(&r, kn, scheme)?;
    let scaled_sum = ybar.tr_mul(&ybar) / (c.psi2 * kn as f64);
    let theta_sq = (kn * kn) as f64 / n as f64;
    Ok(MrcParts {
        scaled_sum,
        psi_hat: noise_cov_from_returns(&r),
        bias_factor: c.psi1 / (theta_sq * c.psi2),
    })
}

/// Bias-corrected MRC at window `kn`, before the finite-sample rescaling
/// steps. This is the quantity the kernel representation reproduces.
pub fn mrc_pre_rescaling(panel: &SyncedPanel, kn: usize, scheme: &WeightScheme) -> Result<DMatrix<f64>> {
    check_window(kn, panel.n())?;
    let p = mrc_parts(panel, kn, scheme)?;
    Ok(p.scaled_sum - p.psi_hat * p.bias_factor)
}

fn check_window(kn: usize, n: usize) -> Result<()> {
    if kn < 2 || kn + 1 > n {
        return Err(Error::WindowOutOfRange { kn, n });
    }
    Ok(())
}

/// Balanced, bias-corrected modulated realised covariance.
///
/// The window follows `kn = floor(theta sqrt(n))` and the bias correction
/// uses `theta^2 = kn^2 / n` so the two always agree. Negative variances are
/// reported as warnings, never truncated.
pub fn mrc_balanced(panel: &SyncedPanel, config: &PreAvgConfig, scheme: &WeightScheme) -> Result<CovEstimate> {
    if !config.is_balanced() {
        return Err(Error::InvalidConfig(format!(
            "balanced MRC needs delta = 0, got {}",
            config.delta
        )));
    }
    let n = panel.n();
    let (kn, clamped) = window_for(config, n)?;
    let p = mrc_parts(panel, kn, scheme)?;
    let edge = n as f64 / (n - kn + 2) as f64;
    // Equals 1 - psi1 / (2 psi2 kn^2); zero for the tent weight at kn = 2.
    let rescale = 1.0 - p.bias_factor / (2.0 * n as f64);
    if !(rescale > 1e-8) {
        return Err(Error::WindowOutOfRange { kn, n });
    }
    let m = (p.scaled_sum * edge - p.psi_hat * p.bias_factor) / rescale;

    let mut est = CovEstimate::new(m, "mrc", n);
    fill_meta(&mut est, panel, kn, scheme, clamped);
    est.bias_corrected = true;
    est.flag_definiteness();
    Ok(est)
}

/// MRC with an enlarged window `kn ~ theta n^(1/2 + delta)`: no bias
/// correction, positive semi-definite by construction.
pub fn mrc_psd(panel: &SyncedPanel, config: &PreAvgConfig, scheme: &WeightScheme) -> Result<CovEstimate> {
    if !(config.delta > 0.0 && config.delta < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "PSD MRC needs delta in (0, 1/2), got {}",
            config.delta
        )));
    }
    let n = panel.n();
    let (kn, clamped) = window_for(config, n)?;
    let p = mrc_parts(panel, kn, scheme)?;
    let edge = n as f64 / (n - kn + 2) as f64;

    let mut est = CovEstimate::new(p.scaled_sum * edge, "mrc-psd", n);
    fill_meta(&mut est, panel, kn, scheme, clamped);
    est.psd_guaranteed = true;
    Ok(est)
}

pub(crate) fn fill_meta(est: &mut CovEstimate, panel: &SyncedPanel, kn: usize, scheme: &WeightScheme, clamped: bool) {
    est.kn_used = Some(kn);
    est.theta_used = Some(kn as f64 / (panel.n() as f64).sqrt());
    est.weight = Some(scheme.name().to_string());
    est.sync = Some(panel.scheme());
    if clamped {
        est.warnings.push(EstimateWarning::WindowClamped);
    }
}
