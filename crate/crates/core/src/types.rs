//! Domain types shared by every estimator: tick series, synchronised panels,
//! window configuration and estimate containers.
//!
//! Time is always normalised to the unit interval, one session per series.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// One asset's irregular observation times and log-prices.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    asset_id: String,
    times: Vec<f64>,
    log_prices: Vec<f64>,
}

impl TickSeries {
    pub fn new(asset_id: impl Into<String>, times: Vec<f64>, log_prices: Vec<f64>) -> Result<Self> {
        let asset_id = asset_id.into();
        if times.len() != log_prices.len() {
            return Err(Error::InvalidSeries(format!(
                "{asset_id}: {} times but {} prices",
                times.len(),
                log_prices.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "{asset_id}: need at least 2 observations, got {}",
                times.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidSeries(format!(
                "{asset_id}: time {t} outside [0, 1]"
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "{asset_id}: times not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if log_prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "{asset_id}: non-finite log-price"
            )));
        }
        Ok(Self {
            asset_id,
            times,
            log_prices,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_prices(&self) -> &[f64] {
        &self.log_prices
    }

    /// Number of observations (n_k).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Tick-to-tick log returns; one fewer than the number of observations.
    pub fn returns(&self) -> Vec<f64> {
        self.log_prices.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Last log-price observed at or before `t`, if any.
    pub fn price_at_or_before(&self, t: f64) -> Option<f64> {
        let idx = self.times.partition_point(|&s| s <= t);
        (idx > 0).then(|| self.log_prices[idx - 1])
    }
}

/// How a panel's common grid came about. Carried for provenance only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncScheme {
    Calendar,
    RefreshTime,
    NativeSynchronous,
}

impl fmt::Display for SyncScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyncScheme::Calendar => "calendar",
            SyncScheme::RefreshTime => "refresh_time",
            SyncScheme::NativeSynchronous => "native_synchronous",
        })
    }
}

/// `d` assets observed on a common grid of `n + 1` time points.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedPanel {
    grid_times: Vec<f64>,
    log_prices: DMatrix<f64>,
    scheme: SyncScheme,
}

impl SyncedPanel {
    pub fn new(grid_times: Vec<f64>, log_prices: DMatrix<f64>, scheme: SyncScheme) -> Result<Self> {
        if grid_times.len() != log_prices.nrows() {
            return Err(Error::InvalidPanel(format!(
                "{} grid times but {} price rows",
                grid_times.len(),
                log_prices.nrows()
            )));
        }
        if grid_times.len() < 2 {
            return Err(Error::InvalidPanel("need at least 2 grid points".into()));
        }
        if log_prices.ncols() == 0 {
            return Err(Error::InvalidPanel("panel has no assets".into()));
        }
        if grid_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPanel("grid times not strictly increasing".into()));
        }
        if grid_times.iter().any(|t| !t.is_finite()) || log_prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPanel("non-finite entry".into()));
        }
        Ok(Self {
            grid_times,
            log_prices,
            scheme,
        })
    }

    /// Panel on the equidistant grid `i / n`, `i = 0..=n`, from a
    /// `(n + 1) x d` price matrix.
    pub fn equidistant(log_prices: DMatrix<f64>) -> Result<Self> {
        let rows = log_prices.nrows();
        if rows < 2 {
            return Err(Error::InvalidPanel("need at least 2 grid points".into()));
        }
        let n = (rows - 1) as f64;
        let grid = (0..rows).map(|i| i as f64 / n).collect();
        Self::new(grid, log_prices, SyncScheme::NativeSynchronous)
    }

    pub fn grid_times(&self) -> &[f64] {
        &self.grid_times
    }

    pub fn log_prices(&self) -> &DMatrix<f64> {
        &self.log_prices
    }

    pub fn scheme(&self) -> SyncScheme {
        self.scheme
    }

    /// Number of assets.
    pub fn dim(&self) -> usize {
        self.log_prices.ncols()
    }

    /// Number of returns, i.e. grid points minus one.
    pub fn n(&self) -> usize {
        self.log_prices.nrows() - 1
    }

    /// Splits the panel back into one tick series per column.
    pub fn to_series(&self, asset_ids: &[&str]) -> Result<Vec<TickSeries>> {
        (0..self.dim())
            .map(|c| {
                let id = asset_ids
                    .get(c)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("asset{}", c + 1));
                TickSeries::new(
                    id,
                    self.grid_times.clone(),
                    self.log_prices.column(c).iter().copied().collect(),
                )
            })
            .collect()
    }
}

/// `n x d` matrix of increments: row `i` is price row `i + 1` minus row `i`.
pub fn log_returns(panel: &SyncedPanel) -> DMatrix<f64> {
    let p = panel.log_prices();
    let n = panel.n();
    DMatrix::from_fn(n, p.ncols(), |i, c| p[(i + 1, c)] - p[(i, c)])
}

/// Pre-averaging window: `kn = floor(theta * n^(1/2 + delta))` unless an
/// explicit window is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreAvgConfig {
    pub theta: f64,
    pub delta: f64,
    pub explicit_kn: Option<usize>,
}

impl PreAvgConfig {
    /// Balanced window, `kn ~ theta * sqrt(n)`.
    pub fn balanced(theta: f64) -> Self {
        Self {
            theta,
            delta: 0.0,
            explicit_kn: None,
        }
    }

    /// Enlarged window, `kn ~ theta * n^(1/2 + delta)`.
    pub fn with_delta(theta: f64, delta: f64) -> Self {
        Self {
            theta,
            delta,
            explicit_kn: None,
        }
    }

    pub fn with_kn(mut self, kn: usize) -> Self {
        self.explicit_kn = Some(kn);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in [0, 1/2), got {}",
                self.delta
            )));
        }
        if matches!(self.explicit_kn, Some(0)) {
            return Err(Error::InvalidConfig("explicit kn must be positive".into()));
        }
        Ok(())
    }

    pub fn is_balanced(&self) -> bool {
        self.delta == 0.0
    }
}

impl Default for PreAvgConfig {
    fn default() -> Self {
        Self::balanced(1.0)
    }
}

/// Outcome of [`resolve_kn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedWindow {
    pub kn: usize,
    /// The rule's raw value fell outside `[2, n - 1]` and was clamped.
    pub clamped: bool,
}

pub fn resolve_kn(config: &PreAvgConfig, n: usize) -> Result<ResolvedWindow> {
    config.validate()?;
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "window resolution needs n >= 4, got {n}"
        )));
    }
    if let Some(kn) = config.explicit_kn {
        return Ok(ResolvedWindow { kn, clamped: false });
    }
    let raw = config.theta * (n as f64).powf(0.5 + config.delta);
    // Guard against values like 9.999999999999998 for an exact 10.
    let raw = (raw * (1.0 + 1e-12)).floor();
    let lo = 2.0;
    let hi = (n - 1) as f64;
    let kn = raw.clamp(lo, hi);
    Ok(ResolvedWindow {
        kn: kn as usize,
        clamped: kn != raw,
    })
}

/// Non-fatal conditions attached to an estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimateWarning {
    /// Bias-corrected estimate has a negative eigenvalue.
    NotPsd { min_eigenvalue: f64 },
    /// Diagonal entry is not positive.
    NonPositiveVariance { index: usize },
    /// The window rule was clamped into `[2, n - 1]`.
    WindowClamped,
}

impl fmt::Display for EstimateWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateWarning::NotPsd { min_eigenvalue } => write!(f, "not_psd(min_eigenvalue={min_eigenvalue})"),
            EstimateWarning::NonPositiveVariance { index } => write!(f, "non_positive_variance({index})"),
            EstimateWarning::WindowClamped => f.write_str("window_clamped"),
        }
    }
}

/// A `d x d` integrated covariance estimate with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub matrix: DMatrix<f64>,
    pub estimator: String,
    pub kn_used: Option<usize>,
    pub n_used: usize,
    pub theta_used: Option<f64>,
    pub weight: Option<String>,
    pub sync: Option<SyncScheme>,
    pub bias_corrected: bool,
    pub psd_guaranteed: bool,
    pub warnings: Vec<EstimateWarning>,
}

impl CovEstimate {
    /// Wraps `matrix`, making it exactly symmetric.
    pub fn new(matrix: DMatrix<f64>, estimator: impl Into<String>, n_used: usize) -> Self {
        Self {
            matrix: symmetrize(matrix),
            estimator: estimator.into(),
            kn_used: None,
            n_used,
            theta_used: None,
            weight: None,
            sync: None,
            bias_corrected: false,
            psd_guaranteed: false,
            warnings: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Smallest eigenvalue is at least `-1e-12 * trace`.
    pub fn is_psd(&self) -> bool {
        is_psd(&self.matrix)
    }

    /// Records PSD and diagonal-sign warnings for estimators that do not
    /// guarantee either.
    pub(crate) fn flag_definiteness(&mut self) {
        for i in 0..self.dim() {
            if self.matrix[(i, i)] <= 0.0 {
                self.warnings
                    .push(EstimateWarning::NonPositiveVariance { index: i });
            }
        }
        if !self.is_psd() {
            self.warnings.push(EstimateWarning::NotPsd {
                min_eigenvalue: self.min_eigenvalue(),
            });
        }
    }
}

/// Ψ̂: estimated covariance of the microstructure noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovEstimate {
    pub matrix: DMatrix<f64>,
    pub n_used: usize,
}

/// `(M + M') / 2`, exactly symmetric in floating point.
pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    assert_eq!(d, m.ncols(), "symmetrize needs a square matrix");
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_psd(m: &DMatrix<f64>) -> bool {
    min_eigenvalue(m) >= -1e-12 * m.trace().abs()
}
