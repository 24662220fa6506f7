use super::avar::integrated_quarticity;
use super::triple::WeightTriple;
use crate::error::{Error, Result};
use crate::estimators::{mrc_balanced, noise_cov};
use crate::preavg::WeightScheme;
use crate::types::{resolve_kn, PreAvgConfig, SyncedPanel};

/// Smallest `theta` returned when there is no noise to trade off against.
pub const DEFAULT_MIN_THETA: f64 = 0.1;

/// `(4 / psi2^2)(Phi22 theta IQ + 2 Phi12 psi^2 IV / theta + Phi11 psi^4 / theta^3)`,
/// the univariate asymptotic variance of the balanced MRC; `psi` is the
/// noise standard deviation.
pub fn mrc_variance(theta: f64, iv: f64, iq: f64, psi: f64, scheme: &WeightScheme) -> f64 {
    let c = scheme.constants();
    let p2 = psi * psi;
    4.0 / (c.psi2 * c.psi2)
        * (c.phi22 * theta * iq + 2.0 * c.phi12 * p2 * iv / theta + c.phi11 * p2 * p2 / theta.powi(3))
}

/// Window constant minimising [`mrc_variance`].
///
/// Setting the derivative to zero gives
/// `Phi22 IQ x^2 - 2 Phi12 psi^2 IV x - 3 Phi11 psi^4 = 0` in `x = theta^2`.
/// Without noise the variance decreases towards `theta = 0`, so `min_theta`
/// is returned instead.
pub fn theta_star(iv: f64, iq: f64, psi: f64, scheme: &WeightScheme, min_theta: f64) -> Result<f64> {
    if !(iv > 0.0 && iq > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "theta selection needs positive IV and IQ, got {iv} and {iq}"
        )));
    }
    if !(psi >= 0.0 && psi.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise scale must be >= 0, got {psi}")));
    }
    if psi == 0.0 {
        return Ok(min_theta);
    }
    let c = scheme.constants();
    let p2 = psi * psi;
    let qa = c.phi22 * iq;
    let qb = -2.0 * c.phi12 * p2 * iv;
    let qc = -3.0 * c.phi11 * p2 * p2;
    // qa > 0 and qc < 0, so exactly one root is positive. This form avoids
    // cancellation when qb dominates.
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let x = if qb <= 0.0 {
        (-qb + disc) / (2.0 * qa)
    } else {
        2.0 * qc / (-qb - disc)
    };
    Ok(x.sqrt().max(min_theta))
}

/// Result of [`theta_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSearch {
    pub theta: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates between estimating IV, IQ and the noise variance of asset
/// `asset` at the current `theta` and re-solving for the optimum.
///
/// The estimates see `theta` only through the integer window `kn`, so the
/// search stops once the window stops changing. A window that recurs after
/// a different one means the map cycles between neighbouring windows; the
/// mean of the `theta` values on the cycle is returned.
///
/// When the quarticity estimate is not positive, `IV^2` stands in for it
/// (exact under constant volatility).
pub fn theta_search(
    panel: &SyncedPanel,
    asset: usize,
    scheme: &WeightScheme,
    triple: &WeightTriple,
    start: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ThetaSearch> {
    if asset >= panel.dim() {
        return Err(Error::InvalidConfig(format!("asset index {asset} out of range")));
    }
    let d = panel.dim();
    let n = panel.n();
    let psi = noise_cov(panel).matrix[(asset, asset)].max(0.0).sqrt();
    let mut theta = start;
    let mut visited: Vec<(usize, f64)> = Vec::new();
    for it in 1..=max_iter {
        let cfg = PreAvgConfig::balanced(theta);
        let kn = resolve_kn(&cfg, n)?.kn;
        if let Some(pos) = visited.iter().position(|&(k, _)| k == kn) {
            let cycle = &visited[pos..];
            let mean = cycle.iter().map(|&(_, t)| t).sum::<f64>() / cycle.len() as f64;
            return Ok(ThetaSearch {
                theta: mean,
                iterations: it - 1,
                converged: true,
            });
        }
        visited.push((kn, theta));
        let iv = mrc_balanced(panel, &cfg, scheme)?.matrix[(asset, asset)];
        if !(iv > 0.0) {
            return Err(Error::NonPositiveVariance { index: asset });
        }
        let lambda = integrated_quarticity(panel, &cfg, triple)?.matrix[(asset * d + asset, asset * d + asset)];
        let iq = if lambda > 0.0 { lambda / 2.0 } else { iv * iv };
        let next = theta_star(iv, iq, psi, scheme, DEFAULT_MIN_THETA)?;
        if (next - theta).abs() <= tol * theta.max(1.0) {
            return Ok(ThetaSearch {
                theta: next,
                iterations: it,
                converged: true,
            });
        }
        theta = next;
    }
    Ok(ThetaSearch {
        theta,
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn noise_free_returns_minimum() {
        assert_eq!(theta_star(1.0, 1.0, 0.0, &WeightScheme::min(), 0.1).unwrap(), 0.1);
    }

    #[test]
    fn closed_form_root() {
        let w = WeightScheme::min();
        let t = theta_star(1.0, 1.0, 0.01, &w, 0.0).unwrap();
        let (a, b, c): (f64, f64, f64) = (151.0 / 80640.0, -2.0 / 96.0 * 1e-4, -3.0 / 6.0 * 1e-8);
        let x = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((t - x.sqrt()).abs() < 1e-12 * t);
        let g = golden_min(|th| mrc_variance(th, 1.0, 1.0, 0.01, &w), 1e-4, 10.0);
        assert!((t - g).abs() < 1e-6 * t);
    }

    #[test]
    fn matches_numeric_minimiser_under_scaling() {
        let w = WeightScheme::min();
        for c in [0.5, 2.0] {
            let psi = 0.01 * c;
            let t = theta_star(0.8, 1.3, psi, &w, 0.0).unwrap();
            let g = golden_min(|th| mrc_variance(th, 0.8, 1.3, psi, &w), 1e-4, 10.0);
            assert!((t - g).abs() < 1e-6 * t, "c={c}: {t} vs {g}");
            // First-order condition.
            let h = 1e-5 * t;
            let f = |th| mrc_variance(th, 0.8, 1.3, psi, &w);
            let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
            let d2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
            assert!(d1.abs() < 1e-4 * d2.abs());
        }
    }

    #[test]
    fn search_settles_near_the_oracle_optimum() {
        use nalgebra::DMatrix;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::{Distribution, Normal};

        let n = 23_400;
        let noise_sd = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let step = Normal::new(0.0, (1.0 / n as f64).sqrt()).unwrap();
        let eps = Normal::new(0.0, noise_sd).unwrap();
        let mut x = 0.0;
        let y = DMatrix::from_fn(n + 1, 1, |j, _| {
            if j > 0 {
                x += step.sample(&mut rng);
            }
            x + eps.sample(&mut rng)
        });
        let panel = SyncedPanel::equidistant(y).unwrap();
        let w = WeightScheme::min();
        let triple = WeightTriple::default_triple(1.0).unwrap();
        let s = theta_search(&panel, 0, &w, &triple, 1.0, 30, 1e-6).unwrap();
        assert!(s.converged);
        let oracle = theta_star(1.0, 1.0, noise_sd, &w, 0.0).unwrap();
        assert!((s.theta / oracle - 1.0).abs() < 0.3, "{} vs {oracle}", s.theta);
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = WeightScheme::min();
        assert!(theta_star(0.0, 1.0, 0.1, &w, 0.1).is_err());
        assert!(theta_star(1.0, 1.0, -0.1, &w, 0.1).is_err());
    }
}
