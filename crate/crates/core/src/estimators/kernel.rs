//! The balanced MRC written as a weighted sum of return autocovariances.

use nalgebra::DMatrix;

use super::mrc::{fill_meta, window_for};
use crate::error::{Error, Result};
use crate::preavg::WeightScheme;
use crate::types::{log_returns, CovEstimate, PreAvgConfig, SyncedPanel};

/// Autocovariance weights equivalent to the bias-corrected MRC at window `kn`.
#[derive(Debug, Clone)]
pub struct KernelForm {
    pub kn: usize,
    pub n: usize,
    /// `delta0[i - 1]` weights `r_i r_i'` for `i = 1..=n`.
    pub delta0: Vec<f64>,
    /// `deltah[h - 1][i - 1]` weights `r_i r_{i+h}'` for `h = 1..=kn-2`, `i = 1..=n-h`.
    pub deltah: Vec<Vec<f64>>,
    scheme: WeightScheme,
}

impl KernelForm {
    /// Builds the weights for `n` returns. Needs `n >= 2 kn` so the three
    /// boundary regimes do not overlap.
    pub fn new(n: usize, kn: usize, scheme: &WeightScheme) -> Result<Self> {
        if kn < 2 || n < 2 * kn {
            return Err(Error::WindowOutOfRange { kn, n });
        }
        let c = scheme.finite_sample(kn)?;
        let g = &c.weights;
        let norm = 1.0 / (c.psi2 * kn as f64);
        let theta_sq = (kn * kn) as f64 / n as f64;
        let noise = c.psi1 / (theta_sq * c.psi2 * 2.0 * n as f64);

        let delta0 = (1..=n)
            .map(|i| {
                let s: f64 = if i <= kn - 2 {
                    (1..=i).map(|j| g[j] * g[j]).sum()
                } else if i <= n - kn + 2 {
                    (1..kn).map(|j| g[j] * g[j]).sum()
                } else {
                    (1..=(n - i + 1)).map(|j| g[kn - j] * g[kn - j]).sum()
                };
                norm * s - noise
            })
            .collect();

        // g at (kn - j + h) / kn is zero once the argument reaches 1.
        let at = |k: usize| if k <= kn { g[k] } else { 0.0 };
        let deltah = (1..kn.saturating_sub(1))
            .map(|h| {
                (1..=(n - h))
                    .map(|i| {
                        let s: f64 = if i + h + 2 <= kn {
                            (1..=i).map(|j| g[j] * g[j + h]).sum()
                        } else if i <= n - kn + 2 {
                            (1..(kn - h)).map(|j| g[j] * g[j + h]).sum()
                        } else {
                            (1..=(n - i + 1)).map(|j| g[kn - j] * at(kn - j + h)).sum()
                        };
                        norm * s
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            kn,
            n,
            delta0,
            deltah,
            scheme: scheme.clone(),
        })
    }

    /// Flat-top kernel `k(s) = phi2(s) / psi2` implied by the weight.
    pub fn implied_kernel(&self, s: f64) -> f64 {
        self.scheme.implied_kernel(s)
    }

    /// Applies the weights to an `n x d` return matrix.
    pub fn apply(&self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if r.nrows() != self.n {
            return Err(Error::InvalidPanel(format!(
                "kernel weights built for n={} applied to {} returns",
                self.n,
                r.nrows()
            )));
        }
        let d = r.ncols();
        let mut out = DMatrix::zeros(d, d);
        for (i, w) in self.delta0.iter().enumerate() {
            let ri = r.row(i);
            out += ri.transpose() * ri * *w;
        }
        for (h, weights) in self.deltah.iter().enumerate() {
            let h = h + 1;
            for (i, w) in weights.iter().enumerate() {
                let cross = r.row(i).transpose() * r.row(i + h);
                out += (&cross + cross.transpose()) * *w;
            }
        }
        Ok(out)
    }
}

/// Bias-corrected MRC computed through its kernel representation.
///
/// Agrees with [`super::mrc_pre_rescaling`] up to rounding; unlike
/// [`super::mrc_balanced`] it applies neither the `n / (n - kn + 2)` factor
/// nor the final rescaling.
pub fn mrc_kernel_form(panel: &SyncedPanel, config: &PreAvgConfig, scheme: &WeightScheme) -> Result<CovEstimate> {
    if !config.is_balanced() {
        return Err(Error::InvalidConfig("kernel form needs delta = 0".into()));
    }
    let n = panel.n();
    let (kn, clamped) = window_for(config, n)?;
    let form = KernelForm::new(n, kn, scheme)?;
    let m = form.apply(&log_returns(panel))?;
    let mut est = CovEstimate::new(m, "mrc-kernel", n);
    fill_meta(&mut est, panel, kn, scheme, clamped);
    est.bias_corrected = true;
    est.flag_definiteness();
    Ok(est)
}
