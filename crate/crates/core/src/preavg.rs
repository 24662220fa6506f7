//! Pre-averaging weight functions and the pre-averaging transform.
//!
//! A weight function `g` on `[0, 1]` with `g(0) = g(1) = 0` determines
//!
//! ```text
//! phi1(s) = int_s^1 g'(u) g'(u - s) du      psi1 = phi1(0)
//! phi2(s) = int_s^1 g(u)  g(u - s)  du      psi2 = phi2(0)
//! Phi11 = int phi1^2,  Phi12 = int phi1 phi2,  Phi22 = int phi2^2
//! ```
//!
//! and their Riemann analogues at a finite window `kn`, which are what the
//! estimators actually use. Pre-averaged returns are
//! `Ybar_i = sum_{j=1}^{kn-1} g(j/kn) r_{i+j}` for `i = 0..=n-kn+1`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum WeightKind {
    Min,
    Power { a: u32, b: u32 },
    Sine { c: u32 },
    Custom { g: RealFn, g_prime: RealFn, kinks: Vec<f64> },
}

/// Asymptotic constants of a weight function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConstants {
    pub psi1: f64,
    pub psi2: f64,
    pub phi11: f64,
    pub phi12: f64,
    pub phi22: f64,
    /// `int_0^1 g(x) dx`, the normaliser of the pre-averaged Hayashi-Yoshida estimator.
    pub psi_hy: f64,
}

/// Riemann-sum versions of the constants at window `kn`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSampleConstants {
    pub kn: usize,
    pub psi1: f64,
    pub psi2: f64,
    /// `phi1[j]` for `j = 0..kn`.
    pub phi1: Vec<f64>,
    /// `phi2[j]` for `j = 0..kn`.
    pub phi2: Vec<f64>,
    pub phi11: f64,
    pub phi12: f64,
    pub phi22: f64,
    pub psi_hy: f64,
    /// `g(j / kn)` for `j = 0..=kn`.
    pub weights: Vec<f64>,
}

struct SchemeInner {
    name: String,
    kind: WeightKind,
    constants: AsymptoticConstants,
    cache: RwLock<HashMap<usize, Arc<FiniteSampleConstants>>>,
}

/// A pre-averaging weight function together with its constants.
///
/// Cloning is cheap; clones share the per-`kn` constant cache.
#[derive(Clone)]
pub struct WeightScheme {
    inner: Arc<SchemeInner>,
}

impl fmt::Debug for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightScheme")
            .field("name", &self.inner.name)
            .field("constants", &self.inner.constants)
            .finish()
    }
}

impl WeightScheme {
    /// `g(x) = min(x, 1 - x)`, the canonical choice, with closed-form constants.
    pub fn min() -> Self {
        let constants = AsymptoticConstants {
            psi1: 1.0,
            psi2: 1.0 / 12.0,
            phi11: 1.0 / 6.0,
            phi12: 1.0 / 96.0,
            phi22: 151.0 / 80640.0,
            psi_hy: 0.25,
        };
        Self::from_parts("min".into(), WeightKind::Min, constants)
    }

    /// `g(x) = x^a (1 - x)^b` with `a, b >= 1`.
    pub fn power(a: u32, b: u32) -> Result<Self> {
        if a < 1 || b < 1 {
            return Err(Error::InvalidConfig(format!(
                "power weight needs a, b >= 1, got a={a}, b={b}"
            )));
        }
        Self::numeric(format!("power({a},{b})"), WeightKind::Power { a, b })
    }

    /// `g(x) = sin(c * pi * x)` with integer `c >= 1`.
    pub fn sine(c: u32) -> Result<Self> {
        if c < 1 {
            return Err(Error::InvalidConfig("sine weight needs c >= 1".into()));
        }
        Self::numeric(format!("sine({c})"), WeightKind::Sine { c })
    }

    /// User-supplied `g` and `g'`. `kinks` lists the points in `(0, 1)` where
    /// `g'` jumps; they are used as quadrature panel boundaries.
    pub fn custom<G, D>(name: impl Into<String>, g: G, g_prime: D, kinks: &[f64]) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kind = WeightKind::Custom {
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
            kinks: kinks.iter().copied().filter(|k| *k > 0.0 && *k < 1.0).collect(),
        };
        Self::numeric(name.into(), kind)
    }

    /// Looks a scheme up by its CLI name: `min`, `power:A,B`, `sine:C`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "min" {
            return Ok(Self::min());
        }
        let bad = || Error::InvalidConfig(format!("unknown weight scheme '{spec}'"));
        if let Some(rest) = spec.strip_prefix("power:") {
            let (a, b) = rest.split_once(',').ok_or_else(bad)?;
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Self::power(a, b);
        }
        if let Some(rest) = spec.strip_prefix("sine:") {
            return Self::sine(rest.trim().parse().map_err(|_| bad())?);
        }
        Err(bad())
    }

    fn from_parts(name: String, kind: WeightKind, constants: AsymptoticConstants) -> Self {
        Self {
            inner: Arc::new(SchemeInner {
                name,
                kind,
                constants,
                cache: RwLock::new(HashMap::new()),
            }),
        }
    }

    fn numeric(name: String, kind: WeightKind) -> Result<Self> {
        // Constants are filled in once the scheme can evaluate g.
        let placeholder = AsymptoticConstants {
            psi1: f64::NAN,
            psi2: f64::NAN,
            phi11: f64::NAN,
            phi12: f64::NAN,
            phi22: f64::NAN,
            psi_hy: f64::NAN,
        };
        let mut scheme = Self::from_parts(name, kind, placeholder);
        let (g0, g1) = (scheme.g(0.0), scheme.g(1.0));
        if g0.abs() > 1e-12 || g1.abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weight '{}' must vanish at 0 and 1 (g(0)={g0}, g(1)={g1})",
                scheme.name()
            )));
        }
        let constants = scheme.numeric_constants();
        if !(constants.psi2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight '{}' has zero L2 norm",
                scheme.name()
            )));
        }
        let inner = Arc::get_mut(&mut scheme.inner).expect("scheme not yet shared");
        inner.constants = constants;
        Ok(scheme)
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn constants(&self) -> &AsymptoticConstants {
        &self.inner.constants
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self.inner.kind, WeightKind::Min)
    }

    /// `g(x)`, zero outside `[0, 1]`.
    pub fn g(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match &self.inner.kind {
            WeightKind::Min => x.min(1.0 - x),
            WeightKind::Power { a, b } => x.powi(*a as i32) * (1.0 - x).powi(*b as i32),
            WeightKind::Sine { c } => (*c as f64 * PI * x).sin(),
            WeightKind::Custom { g, .. } => g(x),
        }
    }

    /// Piecewise derivative `g'(x)`, zero outside `[0, 1]`.
    pub fn g_prime(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match &self.inner.kind {
            WeightKind::Min => {
                if x < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            WeightKind::Power { a, b } => {
                let (a, b) = (*a as i32, *b as i32);
                a as f64 * x.powi(a - 1) * (1.0 - x).powi(b)
                    - b as f64 * x.powi(a) * (1.0 - x).powi(b - 1)
            }
            WeightKind::Sine { c } => {
                let w = *c as f64 * PI;
                w * (w * x).cos()
            }
            WeightKind::Custom { g_prime, .. } => g_prime(x),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match &self.inner.kind {
            WeightKind::Min => vec![0.5],
            WeightKind::Custom { kinks, .. } => kinks.clone(),
            _ => Vec::new(),
        }
    }

    /// `phi1(s)`, zero outside `[0, 1]`.
    pub fn phi1(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        if let WeightKind::Min = self.inner.kind {
            return if s <= 0.5 { 1.0 - 3.0 * s } else { s - 1.0 };
        }
        self.lag_integral(s, |u, v| self.g_prime(u) * self.g_prime(v))
    }

    /// `phi2(s)`, zero outside `[0, 1]`.
    pub fn phi2(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        if let WeightKind::Min = self.inner.kind {
            return if s <= 0.5 {
                (1.0 - 6.0 * s * s + 6.0 * s * s * s) / 12.0
            } else {
                (1.0 - s).powi(3) / 6.0
            };
        }
        self.lag_integral(s, |u, v| self.g(u) * self.g(v))
    }

    /// The flat-top kernel `phi2(s) / psi2` implied by this weight.
    pub fn implied_kernel(&self, s: f64) -> f64 {
        self.phi2(s.abs()) / self.constants().psi2
    }

    /// `int_s^1 f(u, u - s) du` with panel breaks at the kinks of `g`.
    fn lag_integral<F: Fn(f64, f64) -> f64>(&self, s: f64, f: F) -> f64 {
        let gl = quadrature_rule();
        let mut breaks = self.kinks();
        breaks.extend(self.kinks().iter().map(|k| k + s));
        gl.integrate_piecewise(|u| f(u, u - s), s, 1.0, &breaks, PANELS)
    }

    /// Computes every asymptotic constant by quadrature, ignoring any
    /// closed forms. Exposed so closed forms can be cross-checked.
    pub fn numeric_constants(&self) -> AsymptoticConstants {
        let gl = quadrature_rule();
        let kinks = self.kinks();
        let psi1 = gl.integrate_piecewise(|x| self.g_prime(x).powi(2), 0.0, 1.0, &kinks, PANELS);
        let psi2 = gl.integrate_piecewise(|x| self.g(x).powi(2), 0.0, 1.0, &kinks, PANELS);
        let psi_hy = gl.integrate_piecewise(|x| self.g(x), 0.0, 1.0, &kinks, PANELS);

        // phi1 and phi2 are smooth in s except where two kinks line up.
        let mut outer = kinks.clone();
        for &a in &kinks {
            outer.push(1.0 - a);
            for &b in &kinks {
                outer.push((a - b).abs());
            }
        }
        let p1 = |s: f64| self.lag_integral(s, |u, v| self.g_prime(u) * self.g_prime(v));
        let p2 = |s: f64| self.lag_integral(s, |u, v| self.g(u) * self.g(v));
        let phi11 = gl.integrate_piecewise(|s| p1(s).powi(2), 0.0, 1.0, &outer, PANELS);
        let phi12 = gl.integrate_piecewise(|s| p1(s) * p2(s), 0.0, 1.0, &outer, PANELS);
        let phi22 = gl.integrate_piecewise(|s| p2(s).powi(2), 0.0, 1.0, &outer, PANELS);
        AsymptoticConstants {
            psi1,
            psi2,
            phi11,
            phi12,
            phi22,
            psi_hy,
        }
    }

    /// Finite-sample constants at `kn`, memoised per scheme.
    pub fn finite_sample(&self, kn: usize) -> Result<Arc<FiniteSampleConstants>> {
        if let Some(c) = self.inner.cache.read().expect("cache poisoned").get(&kn) {
            return Ok(Arc::clone(c));
        }
        let c = Arc::new(finite_sample_constants(self, kn)?);
        // A concurrent writer may have raced us; either value is identical.
        self.inner
            .cache
            .write()
            .expect("cache poisoned")
            .insert(kn, Arc::clone(&c));
        Ok(c)
    }
}

const PANELS: usize = 16;

fn quadrature_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Riemann approximations of the constants at window `kn`.
///
/// `phi1[j]` sums the products of weight increments over `i = j+1..=kn`, so
/// that `kn * phi1[0]` equals `psi1` exactly; `phi2[j]` is the lagged product
/// sum `sum_i g(i/kn) g((i-j)/kn)`.
pub fn finite_sample_constants(scheme: &WeightScheme, kn: usize) -> Result<FiniteSampleConstants> {
    if kn < 2 {
        return Err(Error::InvalidConfig(format!("kn must be >= 2, got {kn}")));
    }
    let k = kn as f64;
    let w: Vec<f64> = (0..=kn).map(|i| scheme.g(i as f64 / k)).collect();
    // dg[i] = g(i/kn) - g((i-1)/kn) for i = 1..=kn; dg[0] unused.
    let mut dg = vec![0.0; kn + 1];
    for i in 1..=kn {
        dg[i] = w[i] - w[i - 1];
    }
    let psi1 = k * dg[1..].iter().map(|d| d * d).sum::<f64>();
    let psi2 = w[1..kn].iter().map(|x| x * x).sum::<f64>() / k;
    let psi_hy = w[1..kn].iter().sum::<f64>() / k;

    let phi1: Vec<f64> = (0..kn)
        .map(|j| ((j + 1)..=kn).map(|i| dg[i] * dg[i - j]).sum())
        .collect();
    let phi2: Vec<f64> = (0..kn)
        .map(|j| ((j + 1)..kn).map(|i| w[i] * w[i - j]).sum())
        .collect();

    let sum11: f64 = phi1.iter().map(|x| x * x).sum();
    let sum12: f64 = phi1.iter().zip(&phi2).map(|(a, b)| a * b).sum();
    let sum22: f64 = phi2.iter().map(|x| x * x).sum();
    let phi11 = k * (sum11 - 0.5 * phi1[0] * phi1[0]);
    let phi12 = (sum12 - 0.5 * phi1[0] * phi2[0]) / k;
    let phi22 = (sum22 - 0.5 * phi2[0] * phi2[0]) / (k * k * k);

    Ok(FiniteSampleConstants {
        kn,
        psi1,
        psi2,
        phi1,
        phi2,
        phi11,
        phi12,
        phi22,
        psi_hy,
        weights: w,
    })
}

/// Pre-averages one return series with weights `g(j/kn)`, `j = 0..=kn`.
pub(crate) fn preaverage_slice(returns: &[f64], weights: &[f64]) -> Vec<f64> {
    let kn = weights.len() - 1;
    let n = returns.len();
    debug_assert!(n + 1 >= kn);
    let rows = n + 2 - kn;
    (0..rows)
        .map(|i| {
            let mut acc = 0.0;
            for j in 1..kn {
                acc += weights[j] * returns[i + j - 1];
            }
            acc
        })
        .collect()
}

/// `(n - kn + 2) x d` matrix of pre-averaged returns, one column per asset.
pub fn preaveraged_returns(returns: &DMatrix<f64>, kn: usize, scheme: &WeightScheme) -> Result<DMatrix<f64>> {
    let n = returns.nrows();
    if kn < 2 {
        return Err(Error::WindowOutOfRange { kn, n });
    }
    if n < kn {
        return Err(Error::WindowOutOfRange { kn, n });
    }
    let consts = scheme.finite_sample(kn)?;
    let rows = n + 2 - kn;
    let mut out = DMatrix::zeros(rows, returns.ncols());
    for c in 0..returns.ncols() {
        let col = returns.column(c);
        let pre = preaverage_slice(col.as_slice(), &consts.weights);
        out.column_mut(c).copy_from_slice(&pre);
    }
    Ok(out)
}

/// Same quantity as [`preaveraged_returns`], computed from price levels as
/// `-sum_{j=0}^{kn-1} (g((j+1)/kn) - g(j/kn)) Y_{i+j}`.
pub fn preaveraged_from_levels(levels: &DMatrix<f64>, kn: usize, scheme: &WeightScheme) -> Result<DMatrix<f64>> {
    let n = levels.nrows().saturating_sub(1);
    if kn < 2 || n < kn {
        return Err(Error::WindowOutOfRange { kn, n });
    }
    let k = kn as f64;
    let diffs: Vec<f64> = (0..kn)
        .map(|j| scheme.g((j + 1) as f64 / k) - scheme.g(j as f64 / k))
        .collect();
    let rows = n + 2 - kn;
    Ok(DMatrix::from_fn(rows, levels.ncols(), |i, c| {
        -(0..kn).map(|j| diffs[j] * levels[(i + j, c)]).sum::<f64>()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn min_closed_form_constants() {
        let c = *WeightScheme::min().constants();
        assert_eq!(c.psi1, 1.0);
        assert_eq!(c.psi2, 1.0 / 12.0);
        assert_eq!(c.phi11, 1.0 / 6.0);
        assert_eq!(c.phi12, 1.0 / 96.0);
        assert_eq!(c.phi22, 151.0 / 80640.0);
    }

    #[test]
    fn min_closed_forms_match_quadrature() {
        let w = WeightScheme::min();
        let num = w.numeric_constants();
        let c = w.constants();
        for (a, b) in [
            (num.psi1, c.psi1),
            (num.psi2, c.psi2),
            (num.phi11, c.phi11),
            (num.phi12, c.phi12),
            (num.phi22, c.phi22),
            (num.psi_hy, c.psi_hy),
        ] {
            assert!(rel(a, b) < 1e-12, "{a} vs {b}");
        }
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            let p1 = w.lag_integral(s, |u, v| w.g_prime(u) * w.g_prime(v));
            let p2 = w.lag_integral(s, |u, v| w.g(u) * w.g(v));
            assert!((p1 - w.phi1(s)).abs() < 1e-13);
            assert!((p2 - w.phi2(s)).abs() < 1e-14);
        }
    }

    #[test]
    fn min_weight_values() {
        let w = WeightScheme::min();
        assert_eq!(w.g(0.5), 0.5);
        assert_eq!(w.g(0.0), 0.0);
        assert_eq!(w.g(1.0), 0.0);
        assert_eq!(w.implied_kernel(0.0), 1.0);
        assert_eq!(w.implied_kernel(1.0), 0.0);
    }

    #[test]
    fn power_and_sine_basics() {
        assert_eq!(WeightScheme::power(1, 1).unwrap().g(0.5), 0.25);
        let s = WeightScheme::sine(1).unwrap();
        assert!((s.constants().psi2 - 0.5).abs() < 1e-14);
        // x(1-x): psi1 = int (1-2x)^2 = 1/3, psi2 = 1/30.
        let p = WeightScheme::power(1, 1).unwrap();
        assert!(rel(p.constants().psi1, 1.0 / 3.0) < 1e-13);
        assert!(rel(p.constants().psi2, 1.0 / 30.0) < 1e-13);
        assert!(WeightScheme::power(0, 1).is_err());
        assert!(WeightScheme::sine(0).is_err());
    }

    #[test]
    fn custom_must_vanish_at_ends() {
        assert!(WeightScheme::custom("bad", |x| x, |_| 1.0, &[]).is_err());
        let tri = WeightScheme::custom("tri", |x: f64| x.min(1.0 - x), |x| if x < 0.5 { 1.0 } else { -1.0 }, &[0.5])
            .unwrap();
        assert!(rel(tri.constants().phi22, 151.0 / 80640.0) < 1e-12);
    }

    #[test]
    fn parse_names() {
        assert_eq!(WeightScheme::parse("min").unwrap().name(), "min");
        assert_eq!(WeightScheme::parse("power:2,1").unwrap().name(), "power(2,1)");
        assert_eq!(WeightScheme::parse("sine:2").unwrap().name(), "sine(2)");
        assert!(WeightScheme::parse("cosine").is_err());
    }

    #[test]
    fn finite_sample_at_kn_two() {
        let c = finite_sample_constants(&WeightScheme::min(), 2).unwrap();
        assert_eq!(c.psi1, 1.0);
        assert_eq!(c.psi2, 0.125);
        assert_eq!(c.psi_hy, 0.25);
    }

    #[test]
    fn finite_sample_psi2_close_at_152() {
        let c = finite_sample_constants(&WeightScheme::min(), 152).unwrap();
        // Direct summation, independent of the implementation's loops.
        let direct: f64 = (1..152)
            .map(|i| {
                let x = i as f64 / 152.0;
                x.min(1.0 - x).powi(2)
            })
            .sum::<f64>()
            / 152.0;
        assert!((c.psi2 - direct).abs() < 1e-15);
        assert!((c.psi2 - 1.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn phi22_converges_monotonically() {
        let target = 151.0 / 80640.0;
        let errs: Vec<f64> = [50, 100, 200, 400]
            .iter()
            .map(|&kn| {
                (finite_sample_constants(&WeightScheme::min(), kn).unwrap().phi22 - target).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] / target < 0.01);
    }

    #[test]
    fn error_shrinks_at_least_linearly_in_window() {
        let w = WeightScheme::min();
        let a = *w.constants();
        for kn in [64, 128, 256] {
            let c1 = finite_sample_constants(&w, kn).unwrap();
            let c2 = finite_sample_constants(&w, 2 * kn).unwrap();
            for (x1, x2, t) in [
                (c1.phi11, c2.phi11, a.phi11),
                (c1.phi12, c2.phi12, a.phi12),
                (c1.phi22, c2.phi22, a.phi22),
            ] {
                // Even windows converge at second order for the tent weight.
                let ratio = (x2 - t).abs() / (x1 - t).abs();
                assert!(ratio <= 0.7, "kn={kn}: ratio {ratio}");
                assert!((x1 - t).abs() / t < 1.0 / kn as f64);
            }
        }
    }

    #[test]
    fn increments_of_weights_sum_to_zero() {
        for kn in [2, 3, 10, 57] {
            let c = finite_sample_constants(&WeightScheme::sine(1).unwrap(), kn).unwrap();
            let s: f64 = c.weights.windows(2).map(|w| w[1] - w[0]).sum();
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn cache_returns_same_values() {
        let w = WeightScheme::power(2, 1).unwrap();
        let a = w.finite_sample(30).unwrap();
        let b = w.finite_sample(30).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn preaveraged_kn_two_is_half_return() {
        let r = DMatrix::from_column_slice(4, 1, &[1.0, -2.0, 3.0, 0.5]);
        let y = preaveraged_returns(&r, 2, &WeightScheme::min()).unwrap();
        assert_eq!(y.nrows(), 4);
        for i in 0..4 {
            assert_eq!(y[(i, 0)], 0.5 * r[(i, 0)]);
        }
    }

    #[test]
    fn preaveraged_zero_and_errors() {
        let r = DMatrix::zeros(10, 2);
        let y = preaveraged_returns(&r, 4, &WeightScheme::min()).unwrap();
        assert_eq!(y.nrows(), 8);
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(preaveraged_returns(&DMatrix::zeros(3, 1), 4, &WeightScheme::min()).is_err());
    }
}
