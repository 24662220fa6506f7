#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mrcov::estimators::{self as est, beta_of, corr_of};
use mrcov::inference::{self as inf, StatisticKind, WeightTriple};
use mrcov::ingest::{self, CleaningConfig, Rule};
use mrcov::sim::{self, McEstimator, Scenario, SvModelConfig};
use mrcov::sync::{synchronize, SyncSpec};
use mrcov::{Error, PreAvgConfig, WeightScheme};

create_exception!(mrcov, MrcovError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(m) => PyValueError::new_err(m),
        other => MrcovError::new_err(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn scheme(weight: &str) -> PyResult<WeightScheme> {
    WeightScheme::parse(weight).map_err(err)
}

fn config(theta: f64, delta: f64, kn: Option<usize>) -> PreAvgConfig {
    let c = if delta > 0.0 {
        PreAvgConfig::with_delta(theta, delta)
    } else {
        PreAvgConfig::balanced(theta)
    };
    match kn {
        Some(k) => c.with_kn(k),
        None => c,
    }
}

fn triple(spec: Option<&str>, theta: f64) -> PyResult<WeightTriple> {
    match spec {
        Some(s) => WeightTriple::parse(s, theta),
        None => WeightTriple::default_triple(theta),
    }
    .map_err(err)
}

/// Irregularly observed log-prices of one asset on the session `[0, 1]`.
#[pyclass(name = "TickSeries", module = "mrcov", from_py_object)]
#[derive(Clone)]
struct PyTickSeries(mrcov::TickSeries);

#[pymethods]
impl PyTickSeries {
    #[new]
    fn new(asset_id: String, times: Vec<f64>, log_prices: Vec<f64>) -> PyResult<Self> {
        mrcov::TickSeries::new(asset_id, times, log_prices).map(Self).map_err(err)
    }

    #[getter]
    fn asset_id(&self) -> String {
        self.0.asset_id().to_string()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    #[getter]
    fn log_prices(&self) -> Vec<f64> {
        self.0.log_prices().to_vec()
    }

    fn returns(&self) -> Vec<f64> {
        self.0.returns()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("TickSeries('{}', ticks={})", self.0.asset_id(), self.0.len())
    }
}

fn unwrap_series(series: &[PyTickSeries]) -> Vec<mrcov::TickSeries> {
    series.iter().map(|s| s.0.clone()).collect()
}

/// Assets observed on a common grid.
#[pyclass(name = "SyncedPanel", module = "mrcov", skip_from_py_object)]
struct PySyncedPanel(mrcov::SyncedPanel);

#[pymethods]
impl PySyncedPanel {
    #[new]
    fn new(log_prices: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = log_prices.len();
        let d = log_prices.first().map_or(0, Vec::len);
        if log_prices.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("ragged log-price rows"));
        }
        let flat: Vec<f64> = log_prices.into_iter().flatten().collect();
        mrcov::SyncedPanel::equidistant(DMatrix::from_row_slice(n, d, &flat))
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn grid_times(&self) -> Vec<f64> {
        self.0.grid_times().to_vec()
    }

    #[getter]
    fn log_prices(&self) -> Vec<Vec<f64>> {
        rows(self.0.log_prices())
    }

    /// Number of returns.
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!("SyncedPanel(dim={}, n={})", self.0.dim(), self.0.n())
    }
}

#[pyclass(name = "CovEstimate", module = "mrcov", skip_from_py_object)]
struct PyCovEstimate(mrcov::CovEstimate);

#[pymethods]
impl PyCovEstimate {
    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.0.matrix)
    }

    #[getter]
    fn estimator(&self) -> String {
        self.0.estimator.clone()
    }

    #[getter]
    fn n_used(&self) -> usize {
        self.0.n_used
    }

    #[getter]
    fn kn_used(&self) -> Option<usize> {
        self.0.kn_used
    }

    #[getter]
    fn theta_used(&self) -> Option<f64> {
        self.0.theta_used
    }

    #[getter]
    fn bias_corrected(&self) -> bool {
        self.0.bias_corrected
    }

    #[getter]
    fn psd_guaranteed(&self) -> bool {
        self.0.psd_guaranteed
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.iter().map(|w| w.to_string()).collect()
    }

    fn is_psd(&self) -> bool {
        self.0.is_psd()
    }

    fn min_eigenvalue(&self) -> f64 {
        self.0.min_eigenvalue()
    }

    /// Slope of asset `j` on asset `i`.
    fn beta(&self, i: usize, j: usize) -> PyResult<f64> {
        beta_of(&self.0, i, j).map(|s| s.beta).map_err(err)
    }

    fn corr(&self, i: usize, j: usize) -> PyResult<f64> {
        corr_of(&self.0, i, j).map(|s| s.corr).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("CovEstimate('{}', dim={}, n={})", self.0.estimator, self.0.dim(), self.0.n_used)
    }
}

#[pyclass(name = "AvarEstimate", module = "mrcov", skip_from_py_object)]
struct PyAvarEstimate(inf::AvarEstimate);

#[pymethods]
impl PyAvarEstimate {
    /// `d^2 x d^2`; entry `(k d + k', l d + l')` pairs `(k, k')` with `(l, l')`.
    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.0.matrix)
    }

    #[getter]
    fn theta_used(&self) -> f64 {
        self.0.theta_used
    }

    #[getter]
    fn kn_used(&self) -> usize {
        self.0.kn_used
    }

    #[getter]
    fn n_used(&self) -> usize {
        self.0.n_used
    }

    #[getter]
    fn triple(&self) -> Vec<String> {
        self.0.triple_names.to_vec()
    }
}

#[pyclass(name = "ConfInterval", module = "mrcov", skip_from_py_object)]
struct PyConfInterval(inf::ConfInterval);

#[pymethods]
impl PyConfInterval {
    #[getter]
    fn kind(&self) -> String {
        self.0.kind.to_string()
    }

    #[getter]
    fn i(&self) -> usize {
        self.0.i
    }

    #[getter]
    fn j(&self) -> usize {
        self.0.j
    }

    #[getter]
    fn point(&self) -> f64 {
        self.0.point
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.0.half_width
    }

    #[getter]
    fn lower(&self) -> f64 {
        self.0.lower()
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.0.upper()
    }

    #[getter]
    fn level(&self) -> f64 {
        self.0.level
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }

    /// False when the estimated variance came out negative.
    #[getter]
    fn valid(&self) -> bool {
        self.0.valid
    }

    fn contains(&self, x: f64) -> bool {
        self.0.contains(x)
    }

    fn __repr__(&self) -> String {
        format!(
            "ConfInterval({} {},{}: {} +/- {}, valid={})",
            self.0.kind, self.0.i, self.0.j, self.0.point, self.0.half_width, self.0.valid
        )
    }
}

#[pyfunction]
fn read_series(path: PathBuf) -> PyResult<PyTickSeries> {
    mrcov::io::read_series_file(&path).map(PyTickSeries).map_err(err)
}

#[pyfunction]
fn write_series(path: PathBuf, series: &PyTickSeries) -> PyResult<()> {
    let f = File::create(&path).map_err(|e| err(e.into()))?;
    mrcov::io::write_series(f, &series.0).map_err(err)
}

/// `sync` is `"refresh"` or `"calendar:N"`.
#[pyfunction]
#[pyo3(name = "synchronize", signature = (series, sync = "refresh"))]
fn synchronize_series(series: Vec<PyTickSeries>, sync: &str) -> PyResult<PySyncedPanel> {
    let spec = SyncSpec::parse(sync).map_err(err)?;
    synchronize(&unwrap_series(&series), &spec).map(PySyncedPanel).map_err(err)
}

#[pyfunction]
fn realised_cov(panel: &PySyncedPanel) -> PyCovEstimate {
    PyCovEstimate(est::realised_cov(&panel.0))
}

/// Bias-corrected MRC with `kn = floor(theta sqrt(n))` unless `kn` is given.
#[pyfunction]
#[pyo3(signature = (panel, theta = 1.0, kn = None, weight = "min"))]
fn mrc(panel: &PySyncedPanel, theta: f64, kn: Option<usize>, weight: &str) -> PyResult<PyCovEstimate> {
    est::mrc_balanced(&panel.0, &config(theta, 0.0, kn), &scheme(weight)?)
        .map(PyCovEstimate)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (panel, theta = 1.0, delta = 0.1, kn = None, weight = "min"))]
fn mrc_psd(panel: &PySyncedPanel, theta: f64, delta: f64, kn: Option<usize>, weight: &str) -> PyResult<PyCovEstimate> {
    if !(delta > 0.0) {
        return Err(PyValueError::new_err("mrc_psd needs delta > 0"));
    }
    est::mrc_psd(&panel.0, &config(theta, delta, kn), &scheme(weight)?)
        .map(PyCovEstimate)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (panel, theta = 1.0, kn = None, weight = "min"))]
fn mrc_kernel_form(panel: &PySyncedPanel, theta: f64, kn: Option<usize>, weight: &str) -> PyResult<PyCovEstimate> {
    est::mrc_kernel_form(&panel.0, &config(theta, 0.0, kn), &scheme(weight)?)
        .map(PyCovEstimate)
        .map_err(err)
}

#[pyfunction]
fn hy(series: Vec<PyTickSeries>) -> PyResult<PyCovEstimate> {
    est::hy_classic_cov(&unwrap_series(&series)).map(PyCovEstimate).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (series, theta = 1.0, kn = None, weight = "min"))]
fn hy_preavg(series: Vec<PyTickSeries>, theta: f64, kn: Option<usize>, weight: &str) -> PyResult<PyCovEstimate> {
    est::hy_preavg(&unwrap_series(&series), &config(theta, 0.0, kn), &scheme(weight)?)
        .map(PyCovEstimate)
        .map_err(err)
}

/// Asymptotic covariance of the balanced MRC. `triple` uses the
/// `"scheme;scheme;scheme"` syntax, e.g. `"sine:1;sine:3;sine:6"`.
#[pyfunction]
#[pyo3(signature = (panel, theta = 1.0, kn = None, triple = None))]
fn avar(panel: &PySyncedPanel, theta: f64, kn: Option<usize>, triple: Option<&str>) -> PyResult<PyAvarEstimate> {
    let cfg = config(theta, 0.0, kn);
    let window = mrcov::resolve_kn(&cfg, panel.0.n()).map_err(err)?;
    let realised = window.kn as f64 / (panel.0.n() as f64).sqrt();
    let t = self::triple(triple, realised)?;
    inf::avar_mrc(&panel.0, &cfg, &t).map(PyAvarEstimate).map_err(err)
}

/// `stat` is `"cov"`, `"beta"` or `"corr"`.
#[pyfunction]
#[pyo3(signature = (estimate, avar, stat, i, j, level = 0.95))]
fn confidence_interval(
    estimate: &PyCovEstimate,
    avar: &PyAvarEstimate,
    stat: &str,
    i: usize,
    j: usize,
    level: f64,
) -> PyResult<PyConfInterval> {
    let f = match stat {
        "cov" => inf::ci_cov,
        "beta" => inf::ci_beta,
        "corr" => inf::ci_corr,
        other => return Err(PyValueError::new_err(format!("unknown statistic '{other}'"))),
    };
    let ci = f(&estimate.0, &avar.0, i, j, level).map_err(err)?;
    debug_assert!(matches!(
        (stat, ci.kind),
        ("cov", StatisticKind::Covariance) | ("beta", StatisticKind::Beta) | ("corr", StatisticKind::Correlation)
    ));
    Ok(PyConfInterval(ci))
}

/// Returns `(theta, iterations, converged)`.
#[pyfunction]
#[pyo3(signature = (panel, asset, weight = "min", triple = None, start = 1.0, max_iter = 20, tol = 1e-4))]
fn theta_search(
    panel: &PySyncedPanel,
    asset: usize,
    weight: &str,
    triple: Option<&str>,
    start: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<(f64, usize, bool)> {
    let t = self::triple(triple, 1.0)?;
    let s = inf::theta_search(&panel.0, asset, &scheme(weight)?, &t, start, max_iter, tol).map_err(err)?;
    Ok((s.theta, s.iterations, s.converged))
}

#[allow(clippy::too_many_arguments)]
fn cleaning_config(
    exchange: &str,
    open: &str,
    close: &str,
    allowed_conditions: Option<Vec<String>>,
    rule_order: Option<Vec<String>>,
    spread_multiple: f64,
    asset_id: Option<String>,
    path: &std::path::Path,
) -> PyResult<CleaningConfig> {
    let mut cfg = CleaningConfig::new(exchange);
    cfg.open = ingest::parse_hms(open).map_err(err)?;
    cfg.close = ingest::parse_hms(close).map_err(err)?;
    if let Some(c) = allowed_conditions {
        cfg.allowed_conditions = c.into_iter().collect();
    }
    if let Some(order) = rule_order {
        cfg.rule_order = order
            .iter()
            .map(|s| Rule::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown rule '{s}'"))))
            .collect::<PyResult<_>>()?;
    }
    cfg.wide_spread_multiple = spread_multiple;
    cfg.asset_id = asset_id.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "asset".into())
    });
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn report_dict<'py>(py: Python<'py>, r: &ingest::CleaningReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("input", r.input)?;
    for (rule, count) in &r.deletions {
        d.set_item(rule.name(), *count)?;
    }
    d.set_item("aggregation", r.aggregated)?;
    d.set_item("output", r.output)?;
    Ok(d)
}

/// Cleans a trade file; returns the series and the per-rule deletion counts.
#[pyfunction]
#[pyo3(signature = (path, exchange, open = "09:30:00", close = "16:00:00", allowed_conditions = None,
    rule_order = None, spread_multiple = 10.0, asset_id = None))]
#[allow(clippy::too_many_arguments)]
fn clean_trades<'py>(
    py: Python<'py>,
    path: PathBuf,
    exchange: &str,
    open: &str,
    close: &str,
    allowed_conditions: Option<Vec<String>>,
    rule_order: Option<Vec<String>>,
    spread_multiple: f64,
    asset_id: Option<String>,
) -> PyResult<(PyTickSeries, Bound<'py, PyDict>)> {
    let cfg = cleaning_config(exchange, open, close, allowed_conditions, rule_order, spread_multiple, asset_id, &path)?;
    let f = File::open(&path).map_err(|e| err(e.into()))?;
    let records = ingest::read_trades(f).map_err(err)?;
    let (series, report) = ingest::clean_trades(&records, &cfg).map_err(err)?;
    Ok((PyTickSeries(series), report_dict(py, &report)?))
}

/// Cleans a quote file into mid-quote log-prices.
#[pyfunction]
#[pyo3(signature = (path, exchange, open = "09:30:00", close = "16:00:00", allowed_conditions = None,
    rule_order = None, spread_multiple = 10.0, asset_id = None))]
#[allow(clippy::too_many_arguments)]
fn clean_quotes<'py>(
    py: Python<'py>,
    path: PathBuf,
    exchange: &str,
    open: &str,
    close: &str,
    allowed_conditions: Option<Vec<String>>,
    rule_order: Option<Vec<String>>,
    spread_multiple: f64,
    asset_id: Option<String>,
) -> PyResult<(PyTickSeries, Bound<'py, PyDict>)> {
    let cfg = cleaning_config(exchange, open, close, allowed_conditions, rule_order, spread_multiple, asset_id, &path)?;
    let f = File::open(&path).map_err(|e| err(e.into()))?;
    let records = ingest::read_quotes(f).map_err(err)?;
    let (series, report) = ingest::clean_quotes(&records, &cfg).map_err(err)?;
    Ok((PyTickSeries(series), report_dict(py, &report)?))
}

#[pyfunction]
fn noise_ratio(series: &PyTickSeries, sparse_n: usize) -> PyResult<f64> {
    ingest::noise_ratio(&series.0, sparse_n).map_err(err)
}

fn scenario(gamma2: f64, lambdas: Option<Vec<f64>>) -> Scenario {
    match lambdas {
        Some(l) => Scenario::poisson(gamma2, &l),
        None => Scenario::full_grid(gamma2),
    }
}

/// One replication of the two-asset stochastic volatility model. Without
/// `lambdas` every grid point is observed. Returns the observed series and
/// the integrated covariance.
#[pyfunction]
#[pyo3(signature = (gamma2 = 0.001, lambdas = None, rep = 0, seed = 0, grid_n = 23_400))]
fn simulate_rep(
    gamma2: f64,
    lambdas: Option<Vec<f64>>,
    rep: u64,
    seed: u64,
    grid_n: usize,
) -> PyResult<(Vec<PyTickSeries>, Vec<Vec<f64>>)> {
    let model = SvModelConfig {
        grid_n,
        ..SvModelConfig::standard()
    };
    let data = sim::simulate_rep(&model, &scenario(gamma2, lambdas), rep, seed).map_err(err)?;
    let truth = rows(&data.paths.true_cov);
    Ok((data.series.into_iter().map(PyTickSeries).collect(), truth))
}

/// Monte Carlo study; `scenarios` holds `(gamma2, lambdas or None)` pairs and
/// `estimators` labels such as `"rc:26"`, `"mrc"` or `"hy-preavg"`. Returns
/// the summary table as CSV.
#[pyfunction]
#[pyo3(signature = (scenarios, estimators, reps = 250, seed = 1, theta = 1.0, delta = 0.1, weight = "min", grid_n = 23_400))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo(
    py: Python<'_>,
    scenarios: Vec<(f64, Option<Vec<f64>>)>,
    estimators: Vec<String>,
    reps: usize,
    seed: u64,
    theta: f64,
    delta: f64,
    weight: &str,
    grid_n: usize,
) -> PyResult<String> {
    let scenarios: Vec<Scenario> = scenarios.into_iter().map(|(g, l)| scenario(g, l)).collect();
    let estimators = estimators
        .iter()
        .map(|s| McEstimator::parse(s, theta, delta))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let w = scheme(weight)?;
    let model = SvModelConfig {
        grid_n,
        ..SvModelConfig::standard()
    };
    let summary = py
        .detach(|| sim::run_monte_carlo(&model, &scenarios, &estimators, &w, reps, seed))
        .map_err(err)?;
    Ok(summary.to_csv())
}

#[pymodule]
#[pyo3(name = "mrcov")]
fn mrcov_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MrcovError", m.py().get_type::<MrcovError>())?;
    m.add_class::<PyTickSeries>()?;
    m.add_class::<PySyncedPanel>()?;
    m.add_class::<PyCovEstimate>()?;
    m.add_class::<PyAvarEstimate>()?;
    m.add_class::<PyConfInterval>()?;
    m.add_function(wrap_pyfunction!(read_series, m)?)?;
    m.add_function(wrap_pyfunction!(write_series, m)?)?;
    m.add_function(wrap_pyfunction!(synchronize_series, m)?)?;
    m.add_function(wrap_pyfunction!(realised_cov, m)?)?;
    m.add_function(wrap_pyfunction!(mrc, m)?)?;
    m.add_function(wrap_pyfunction!(mrc_psd, m)?)?;
    m.add_function(wrap_pyfunction!(mrc_kernel_form, m)?)?;
    m.add_function(wrap_pyfunction!(hy, m)?)?;
    m.add_function(wrap_pyfunction!(hy_preavg, m)?)?;
    m.add_function(wrap_pyfunction!(avar, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(theta_search, m)?)?;
    m.add_function(wrap_pyfunction!(clean_trades, m)?)?;
    m.add_function(wrap_pyfunction!(clean_quotes, m)?)?;
    m.add_function(wrap_pyfunction!(noise_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_rep, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    Ok(())
}
