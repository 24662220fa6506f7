use nalgebra::{Matrix3, RowVector3};

use crate::error::{Error, Result};
use crate::preavg::{AsymptoticConstants, WeightScheme};

/// Largest equilibrated condition number accepted for the triple's matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Three auxiliary weights whose fourth-moment statistics are combined to
/// estimate the asymptotic covariance of the MRC built with `g0`.
#[derive(Debug, Clone)]
pub struct WeightTriple {
    pub schemes: [WeightScheme; 3],
    pub target: WeightScheme,
    pub theta: f64,
    /// Row `k` is `(theta^2 psi2^2, psi1 psi2, psi1^2 / theta^2)` of scheme `k`.
    pub a: Matrix3<f64>,
    /// Combination weights for the target's asymptotic variance.
    pub c: RowVector3<f64>,
    /// Condition number of `a` after scaling rows and columns to unit norm.
    /// Rescaling a weight function or changing `theta` only rescales rows
    /// and columns, so this is the meaningful measure of near-singularity.
    pub condition_number: f64,
}

fn a_row(c: &AsymptoticConstants, theta: f64) -> RowVector3<f64> {
    RowVector3::new(
        theta * theta * c.psi2 * c.psi2,
        c.psi1 * c.psi2,
        c.psi1 * c.psi1 / (theta * theta),
    )
}

/// Coefficients of `(int Lambda, int Theta, Upsilon)` in the asymptotic
/// variance of the MRC built with `g0` at `theta`.
pub fn avar_coefficients(g0: &WeightScheme, theta: f64) -> RowVector3<f64> {
    let c = g0.constants();
    let s = 2.0 / (c.psi2 * c.psi2);
    RowVector3::new(
        s * c.phi22 * theta,
        s * c.phi12 / theta,
        s * c.phi11 / theta.powi(3),
    )
}

fn equilibrated_condition(a: &Matrix3<f64>) -> f64 {
    let mut b = *a;
    for _ in 0..2 {
        for mut r in b.row_iter_mut() {
            let norm = r.norm();
            if norm > 0.0 {
                r /= norm;
            }
        }
        for mut c in b.column_iter_mut() {
            let norm = c.norm();
            if norm > 0.0 {
                c /= norm;
            }
        }
    }
    let sv = b.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

pub fn build_weight_triple(
    g1: &WeightScheme,
    g2: &WeightScheme,
    g3: &WeightScheme,
    theta: f64,
    g0: &WeightScheme,
) -> Result<WeightTriple> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidConfig(format!("theta must be positive, got {theta}")));
    }
    let a = Matrix3::from_rows(&[
        a_row(g1.constants(), theta),
        a_row(g2.constants(), theta),
        a_row(g3.constants(), theta),
    ]);
    let condition = equilibrated_condition(&a);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularWeights { condition });
    }
    let inv = a.try_inverse().ok_or(Error::SingularWeights { condition })?;
    let c = avar_coefficients(g0, theta) * inv;
    Ok(WeightTriple {
        schemes: [g1.clone(), g2.clone(), g3.clone()],
        target: g0.clone(),
        theta,
        a,
        c,
        condition_number: condition,
    })
}

impl WeightTriple {
    /// `{sin(pi x), sin(3 pi x), sin(6 pi x)}` targeting the tent weight.
    ///
    /// Each row of `A` is `psi2^2 (theta^2, r, r^2 / theta^2)` with
    /// `r = psi1 / psi2`, a Vandermonde row in `r`. The sines have
    /// `r = (c pi)^2`, so the three rows are far apart and sampling error in
    /// the `V_n` statistics is not amplified.
    pub fn default_triple(theta: f64) -> Result<Self> {
        build_weight_triple(
            &WeightScheme::sine(1)?,
            &WeightScheme::sine(3)?,
            &WeightScheme::sine(6)?,
            theta,
            &WeightScheme::min(),
        )
    }

    /// `{sin(pi x), x(1 - x), x^2 (1 - x)}` targeting the tent weight.
    /// Invertible, but `r` is 9.87, 10 and 14 for the three rows, so
    /// the combination weights are large and the estimate is noisy.
    pub fn polynomial_triple(theta: f64) -> Result<Self> {
        build_weight_triple(
            &WeightScheme::sine(1)?,
            &WeightScheme::power(1, 1)?,
            &WeightScheme::power(2, 1)?,
            theta,
            &WeightScheme::min(),
        )
    }

    /// Parses `scheme;scheme;scheme`, e.g. `sine:1;power:1,1;power:2,1`,
    /// targeting the tent weight.
    pub fn parse(s: &str, theta: f64) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "a weight triple needs three schemes separated by ';', got '{s}'"
            )));
        }
        let g: Vec<WeightScheme> = parts.iter().map(|p| WeightScheme::parse(p)).collect::<Result<_>>()?;
        build_weight_triple(&g[0], &g[1], &g[2], theta, &WeightScheme::min())
    }

    /// Same schemes and target at another `theta`.
    pub fn at_theta(&self, theta: f64) -> Result<Self> {
        let [g1, g2, g3] = &self.schemes;
        build_weight_triple(g1, g2, g3, theta, &self.target)
    }

    pub fn names(&self) -> [String; 3] {
        self.schemes.clone().map(|s| s.name().to_string())
    }

    /// Weights that isolate the integrated quarticity term, `(1, 0, 0) A^{-1}`.
    pub fn quarticity_weights(&self) -> RowVector3<f64> {
        let inv = self.a.try_inverse().expect("checked at construction");
        RowVector3::new(1.0, 0.0, 0.0) * inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_scheme_is_singular() {
        let s = WeightScheme::sine(1).unwrap();
        let p = WeightScheme::power(1, 1).unwrap();
        let r = build_weight_triple(&s, &s, &p, 1.0, &WeightScheme::min());
        assert!(matches!(r, Err(Error::SingularWeights { .. })));
    }

    #[test]
    fn default_triple_is_well_conditioned() {
        let t = WeightTriple::default_triple(1.0).unwrap();
        assert!(t.condition_number < 100.0, "{}", t.condition_number);
        let p = WeightTriple::polynomial_triple(1.0).unwrap();
        assert!(p.condition_number < 1e6, "{}", p.condition_number);
        assert!(p.condition_number > 100.0 * t.condition_number);
    }

    #[test]
    fn parses_triples() {
        let t = WeightTriple::parse("sine:1;power:1,1;power:2,1", 1.0).unwrap();
        assert_eq!(t.names(), WeightTriple::polynomial_triple(1.0).unwrap().names());
        assert!(WeightTriple::parse("sine:1;sine:2", 1.0).is_err());
        assert!(WeightTriple::parse("sine:1;sine:1;sine:2", 1.0).is_err());
    }

    #[test]
    fn combination_round_trips() {
        for theta in [0.3, 1.0, 2.5] {
            for t in [WeightTriple::default_triple(theta).unwrap(), WeightTriple::polynomial_triple(theta).unwrap()] {
            let back = t.c * t.a;
            let target = avar_coefficients(&WeightScheme::min(), theta);
            for k in 0..3 {
                assert!((back[k] - target[k]).abs() < 1e-10 * target[k].abs(), "theta={theta}");
            }
            let q = t.quarticity_weights() * t.a;
            assert!((q[0] - 1.0).abs() < 1e-9 && q[1].abs() < 1e-9 && q[2].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coefficient_of_quarticity_for_tent() {
        let c = avar_coefficients(&WeightScheme::min(), 1.0);
        assert!((c[0] - 2.0 * 144.0 * 151.0 / 80640.0).abs() < 1e-12);
    }
}
