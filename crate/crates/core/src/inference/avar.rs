use nalgebra::{DMatrix, RowVector3};
use rayon::prelude::*;

use super::triple::WeightTriple;
use super::vn::v_n;
use crate::error::{Error, Result};
use crate::estimators::window_for;
use crate::types::{PreAvgConfig, SyncedPanel};

/// Estimated `d^2 x d^2` asymptotic covariance of `n^{1/4} vec(MRC)`.
///
/// Entry `(k d + k', l d + l')` pairs MRC element `(k, k')` with `(l, l')`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvarEstimate {
    pub matrix: DMatrix<f64>,
    pub theta_used: f64,
    pub kn_used: usize,
    pub n_used: usize,
    pub triple_names: [String; 3],
}

impl AvarEstimate {
    pub fn dim(&self) -> usize {
        (self.matrix.nrows() as f64).sqrt().round() as usize
    }

    /// Entry pairing MRC elements `(k, kp)` and `(l, lp)`.
    pub fn entry(&self, k: usize, kp: usize, l: usize, lp: usize) -> f64 {
        let d = self.dim();
        self.matrix[(k * d + kp, l * d + lp)]
    }
}

fn combine(panel: &SyncedPanel, config: &PreAvgConfig, triple: &WeightTriple, pick: impl Fn(&WeightTriple) -> RowVector3<f64>) -> Result<AvarEstimate> {
    if !config.is_balanced() {
        return Err(Error::InvalidConfig(
            "the asymptotic variance estimator covers the balanced window only".into(),
        ));
    }
    let n = panel.n();
    let (kn, _) = window_for(config, n)?;
    // The constants must match the window actually used.
    let theta = kn as f64 / (n as f64).sqrt();
    let local = triple.at_theta(theta)?;
    let weights = pick(&local);
    let parts: Vec<DMatrix<f64>> = local
        .schemes
        .par_iter()
        .map(|g| v_n(panel, kn, g))
        .collect::<Result<_>>()?;
    let mut m = &parts[0] * weights[0];
    m += &parts[1] * weights[1];
    m += &parts[2] * weights[2];
    Ok(AvarEstimate {
        matrix: crate::types::symmetrize(m),
        theta_used: theta,
        kn_used: kn,
        n_used: n,
        triple_names: local.names(),
    })
}

/// Feasible estimate of the balanced MRC's asymptotic covariance. The
/// triple is re-evaluated at the realised `theta = kn / sqrt(n)`.
pub fn avar_mrc(panel: &SyncedPanel, config: &PreAvgConfig, triple: &WeightTriple) -> Result<AvarEstimate> {
    combine(panel, config, triple, |t| t.c)
}

/// Estimate of the integrated quarticity array `int Lambda`.
pub fn integrated_quarticity(panel: &SyncedPanel, config: &PreAvgConfig, triple: &WeightTriple) -> Result<AvarEstimate> {
    combine(panel, config, triple, |t| t.quarticity_weights())
}
