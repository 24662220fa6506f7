use std::fmt;
use std::fs::File;
use std::path::Path;

use mrcov::estimators::{beta_of, corr_of, hy_classic_cov, hy_preavg, mrc_balanced, mrc_psd, realised_cov};
use mrcov::inference::{avar_mrc, ci_beta, ci_corr, ci_cov, theta_search, ConfInterval, WeightTriple};
use mrcov::ingest::{
    clean_quotes, clean_quotes_report, clean_trades, clean_trades_report, noise_ratio, parse_hms, read_quotes,
    read_trades, CleaningConfig, CleaningReport, Rule,
};
use mrcov::io::{read_series_file, write_series};
use mrcov::sim::{run_monte_carlo, McEstimator, Scenario, SvModelConfig};
use mrcov::sync::{synchronize, SyncSpec};
use mrcov::{CovEstimate, Error, PreAvgConfig, SyncedPanel, TickSeries, WeightScheme};

use crate::args::{CleanArgs, EstimateArgs, EstimatorKind, InferArgs, PipelineArgs, SimulateArgs, Stat};
use crate::report::Report;

#[derive(Debug)]
pub enum CliError {
    /// Inconsistent or malformed flags.
    Usage(String),
    /// Failure reading data or inside the pipeline.
    Data(Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn clean(a: &CleanArgs) -> Result<()> {
    let mut cfg = CleaningConfig::new(a.exchange.clone());
    cfg.open = parse_hms(&a.open).or_else(|e| usage(e.to_string()))?;
    cfg.close = parse_hms(&a.close).or_else(|e| usage(e.to_string()))?;
    cfg.allowed_conditions = a.allow_cond.split(',').map(|s| s.trim().to_string()).collect();
    cfg.wide_spread_multiple = a.spread_multiple;
    if let Some(order) = &a.rule_order {
        cfg.rule_order = order
            .split(',')
            .map(|s| Rule::parse(s).ok_or_else(|| CliError::Usage(format!("unknown rule '{s}'"))))
            .collect::<Result<_>>()?;
    }
    cfg.validate().or_else(|e| usage(e.to_string()))?;
    let (path, kind) = match (&a.trades, &a.quotes) {
        (Some(p), _) => (p, "trades"),
        (None, Some(p)) => (p, "quotes"),
        (None, None) => return usage("one of --trades or --quotes is required"),
    };
    cfg.asset_id = a.asset.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "asset".into())
    });

    let mut report = Report::new("clean");
    report.set("input", path.display());
    report.set("kind", kind);
    report.set("asset", &cfg.asset_id);
    report.set("exchange", &cfg.exchange);
    report.set("session", format!("{}-{}", a.open, a.close));
    report.set("allow_cond", &a.allow_cond);
    report.set(
        "rule_order",
        cfg.rule_order.iter().map(Rule::name).collect::<Vec<_>>().join(","),
    );
    report.set("spread_multiple", cfg.wide_spread_multiple);
    report.set("output", a.output.display());

    let outcome: std::result::Result<(TickSeries, CleaningReport), Error> = if kind == "trades" {
        let rows = read_trades(open(path)?)?;
        let (_, counts) = clean_trades_report(&rows, &cfg)?;
        clean_trades(&rows, &cfg).map_err(|e| finish_failed(&mut report, &counts, a, e))
    } else {
        let rows = read_quotes(open(path)?)?;
        let (_, counts) = clean_quotes_report(&rows, &cfg)?;
        clean_quotes(&rows, &cfg).map_err(|e| finish_failed(&mut report, &counts, a, e))
    };
    let (series, counts) = outcome?;
    if let Some(sparse) = a.noise_ratio {
        report.set("noise_ratio_grid", sparse);
        report.set("noise_ratio", noise_ratio(&series, sparse)?);
    }
    let file = File::create(&a.output).map_err(|e| CliError::io(&a.output, e))?;
    write_series(std::io::BufWriter::new(file), &series)?;
    report.body(&counts.to_csv());
    report.emit(a.report.as_deref())
}

/// Emits the counts gathered before cleaning failed, then hands the error back.
fn finish_failed(report: &mut Report, counts: &CleaningReport, a: &CleanArgs, e: Error) -> Error {
    report.body(&counts.to_csv());
    if let Err(w) = report.emit(a.report.as_deref()) {
        eprintln!("mrcov: {w}");
    }
    e
}

enum Theta {
    Fixed(f64),
    Auto,
}

fn parse_theta(s: &str) -> Result<Theta> {
    if s.trim() == "auto" {
        return Ok(Theta::Auto);
    }
    match s.trim().parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(Theta::Fixed(t)),
        _ => usage(format!("--theta must be a positive number or 'auto', got '{s}'")),
    }
}

fn parse_triple(s: Option<&str>, theta: f64) -> Result<WeightTriple> {
    let t = match s {
        Some(s) => WeightTriple::parse(s, theta),
        None => WeightTriple::default_triple(theta),
    };
    t.map_err(|e| match e {
        Error::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other),
    })
}

/// Everything resolved from the shared pipeline flags.
struct Pipeline {
    series: Vec<TickSeries>,
    weight: WeightScheme,
    sync: SyncSpec,
    theta: Theta,
    kn: Option<usize>,
}

impl Pipeline {
    fn load(p: &PipelineArgs) -> Result<Self> {
        let weight = WeightScheme::parse(&p.weight).or_else(|e| usage(e.to_string()))?;
        let sync = SyncSpec::parse(&p.sync).or_else(|e| usage(e.to_string()))?;
        let theta = parse_theta(&p.theta)?;
        if p.kn == Some(0) || p.kn == Some(1) {
            return usage("--kn must be at least 2");
        }
        let series = p
            .inputs
            .iter()
            .map(|path| read_series_file(path))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            series,
            weight,
            sync,
            theta,
            kn: p.kn,
        })
    }

    fn panel(&self) -> Result<SyncedPanel> {
        Ok(synchronize(&self.series, &self.sync)?)
    }

    /// The window constant: fixed, or the mean over assets of the
    /// iteratively optimised value.
    fn resolve_theta(&self, panel: &SyncedPanel, triple_spec: Option<&str>) -> Result<f64> {
        match self.theta {
            Theta::Fixed(t) => Ok(t),
            Theta::Auto => {
                let triple = parse_triple(triple_spec, 1.0)?;
                let mut sum = 0.0;
                for k in 0..panel.dim() {
                    let s = theta_search(panel, k, &self.weight, &triple, 1.0, 20, 1e-4)?;
                    if !s.converged {
                        eprintln!("mrcov: warning: theta search for asset {k} did not converge");
                    }
                    sum += s.theta;
                }
                Ok(sum / panel.dim() as f64)
            }
        }
    }

    fn config(&self, theta: f64, delta: f64) -> PreAvgConfig {
        let c = if delta > 0.0 {
            PreAvgConfig::with_delta(theta, delta)
        } else {
            PreAvgConfig::balanced(theta)
        };
        match self.kn {
            Some(k) => c.with_kn(k),
            None => c,
        }
    }

    fn names(&self) -> Vec<String> {
        self.series.iter().map(|s| s.asset_id().to_string()).collect()
    }
}

fn check_delta(kind: EstimatorKind, delta: Option<f64>) -> Result<f64> {
    match (kind, delta) {
        (EstimatorKind::Mrc, Some(d)) if d != 0.0 => usage(
            "--delta > 0 removes the bias correction; use --estimator mrc-psd instead of mrc",
        ),
        (EstimatorKind::Mrc, _) => Ok(0.0),
        (EstimatorKind::MrcPsd, None) => Ok(0.1),
        (EstimatorKind::MrcPsd, Some(d)) if d > 0.0 && d < 0.5 => Ok(d),
        (EstimatorKind::MrcPsd, Some(d)) => usage(format!("mrc-psd needs --delta in (0, 0.5), got {d}")),
        (_, Some(_)) => usage("--delta applies to mrc and mrc-psd only"),
        (_, None) => Ok(0.0),
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        usage(format!("--level must lie in (0, 1), got {level}"))
    }
}

struct Estimated {
    est: CovEstimate,
    panel: Option<SyncedPanel>,
    theta: Option<f64>,
}

fn run_estimator(p: &Pipeline, kind: EstimatorKind, delta: f64, triple_spec: Option<&str>) -> Result<Estimated> {
    if p.kn.is_some() && matches!(kind, EstimatorKind::Rv | EstimatorKind::Hy) {
        return usage(format!("--kn does not apply to {}", kind.name()));
    }
    Ok(match kind {
        EstimatorKind::Rv => {
            let panel = p.panel()?;
            Estimated {
                est: realised_cov(&panel),
                panel: Some(panel),
                theta: None,
            }
        }
        EstimatorKind::Hy => Estimated {
            est: hy_classic_cov(&p.series)?,
            panel: None,
            theta: None,
        },
        EstimatorKind::HyPreavg => {
            let theta = match p.theta {
                Theta::Fixed(t) => t,
                Theta::Auto => p.resolve_theta(&p.panel()?, triple_spec)?,
            };
            Estimated {
                est: hy_preavg(&p.series, &p.config(theta, 0.0), &p.weight)?,
                panel: None,
                theta: Some(theta),
            }
        }
        EstimatorKind::Mrc | EstimatorKind::MrcPsd => {
            let panel = p.panel()?;
            let theta = p.resolve_theta(&panel, triple_spec)?;
            let cfg = p.config(theta, delta);
            let est = if kind == EstimatorKind::Mrc {
                mrc_balanced(&panel, &cfg, &p.weight)?
            } else {
                mrc_psd(&panel, &cfg, &p.weight)?
            };
            Estimated {
                est,
                panel: Some(panel),
                theta: Some(theta),
            }
        }
    })
}

fn describe(report: &mut Report, p: &Pipeline, args: &PipelineArgs, kind: EstimatorKind, delta: f64, e: &Estimated) {
    report.set("estimator", kind.name());
    report.set(
        "inputs",
        args.inputs.iter().map(|x| x.display().to_string()).collect::<Vec<_>>().join(","),
    );
    report.set("assets", p.names().join(","));
    let uses_sync = !matches!(kind, EstimatorKind::Hy | EstimatorKind::HyPreavg);
    report.set("sync", if uses_sync { p.sync.to_string() } else { "none".into() });
    report.set("weight", p.weight.name());
    report.set("theta", &args.theta);
    if let Some(t) = e.theta {
        report.set("theta_resolved", t);
    }
    report.set("delta", delta);
    if let Some(k) = e.est.kn_used {
        report.set("kn", k);
    }
    if let Some(t) = e.est.theta_used {
        report.set("theta_used", t);
    }
    report.set("n", e.est.n_used);
    report.set("bias_corrected", e.est.bias_corrected);
    report.set("psd", e.est.is_psd());
    let warnings: Vec<String> = e.est.warnings.iter().map(|w| w.to_string()).collect();
    report.set("warnings", if warnings.is_empty() { "none".into() } else { warnings.join(";") });
    for w in &warnings {
        eprintln!("mrcov: warning: {w}");
    }
}

/// One output row: a point value, optionally with an interval.
struct Row {
    stat: Stat,
    i: usize,
    j: usize,
    value: f64,
    interval: Option<ConfInterval>,
}

fn stat_name(s: Stat) -> &'static str {
    match s {
        Stat::Cov => "cov",
        Stat::Beta => "beta",
        Stat::Corr => "corr",
    }
}

/// Covariances for `i <= j`, correlations for `i < j` and betas of `j`
/// on `i` for `i != j`.
fn index_pairs(stat: Stat, d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let keep = match stat {
                Stat::Cov => i <= j,
                Stat::Corr => i < j,
                Stat::Beta => i != j,
            };
            if keep {
                out.push((i, j));
            }
        }
    }
    out
}

fn point_value(est: &CovEstimate, stat: Stat, i: usize, j: usize) -> f64 {
    let derived = match stat {
        Stat::Cov => return est.matrix[(i, j)],
        Stat::Beta => beta_of(est, i, j).map(|s| s.beta),
        Stat::Corr => corr_of(est, i, j).map(|s| s.corr),
    };
    derived.unwrap_or_else(|e| {
        eprintln!("mrcov: warning: {} {i},{j} undefined: {e}", stat_name(stat));
        f64::NAN
    })
}

fn write_rows(report: &mut Report, names: &[String], rows: &[Row], with_intervals: bool) {
    if with_intervals {
        report.line("statistic,row,col,value,half_width,lower,upper,level,valid");
    } else {
        report.line("statistic,row,col,value");
    }
    for r in rows {
        let head = format!("{},{},{},{}", stat_name(r.stat), names[r.i], names[r.j], r.value);
        match (&r.interval, with_intervals) {
            (Some(ci), true) => report.line(format!(
                "{head},{},{},{},{},{}",
                ci.half_width,
                ci.lower(),
                ci.upper(),
                ci.level,
                ci.valid
            )),
            (None, true) => report.line(format!("{head},NaN,NaN,NaN,NaN,false")),
            _ => report.line(head),
        }
    }
}

fn interval(est: &CovEstimate, avar: &mrcov::inference::AvarEstimate, stat: Stat, i: usize, j: usize, level: f64) -> Result<Option<ConfInterval>> {
    let ci = match stat {
        Stat::Cov => ci_cov(est, avar, i, j, level),
        Stat::Beta => ci_beta(est, avar, i, j, level),
        Stat::Corr => ci_corr(est, avar, i, j, level),
    };
    match ci {
        Ok(ci) => {
            if !ci.valid {
                eprintln!(
                    "mrcov: warning: {} {i},{j}: negative variance estimate, interval invalid",
                    stat_name(stat)
                );
            }
            Ok(Some(ci))
        }
        Err(Error::NonPositiveVariance { index }) => {
            eprintln!(
                "mrcov: warning: {} {i},{j}: variance of asset {index} not positive, no interval",
                stat_name(stat)
            );
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn intervals_report(
    p: &Pipeline,
    args: &PipelineArgs,
    inf: &crate::args::InferenceArgs,
    stats: &[Stat],
    mut report: Report,
    e: Estimated,
) -> Result<()> {
    check_level(inf.level)?;
    let panel = e.panel.as_ref().expect("mrc keeps its panel");
    let theta = e.theta.expect("mrc resolves theta");
    let triple = parse_triple(inf.triple.as_deref(), theta)?;
    let avar = avar_mrc(panel, &p.config(theta, 0.0), &triple)?;
    describe(&mut report, p, args, EstimatorKind::Mrc, 0.0, &e);
    report.set("level", inf.level);
    report.set("triple", triple.names().join(";"));
    let mut rows = Vec::new();
    for &stat in stats {
        for (i, j) in index_pairs(stat, e.est.dim()) {
            rows.push(Row {
                stat,
                i,
                j,
                value: point_value(&e.est, stat, i, j),
                interval: interval(&e.est, &avar, stat, i, j, inf.level)?,
            });
        }
    }
    write_rows(&mut report, &p.names(), &rows, true);
    report.emit(args.output.as_deref())
}

const ALL_STATS: [Stat; 3] = [Stat::Cov, Stat::Corr, Stat::Beta];

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    if a.infer && a.estimator != EstimatorKind::Mrc {
        return usage(format!("--infer requires --estimator mrc, got {}", a.estimator.name()));
    }
    let delta = check_delta(a.estimator, a.delta)?;
    if a.infer {
        check_level(a.inference.level)?;
    }
    let p = Pipeline::load(&a.pipeline)?;
    let e = run_estimator(&p, a.estimator, delta, a.inference.triple.as_deref())?;
    let report = Report::new("estimate");
    if a.infer {
        return intervals_report(&p, &a.pipeline, &a.inference, &ALL_STATS, report, e);
    }
    let mut report = report;
    describe(&mut report, &p, &a.pipeline, a.estimator, delta, &e);
    let mut rows = Vec::new();
    for stat in ALL_STATS {
        for (i, j) in index_pairs(stat, e.est.dim()) {
            rows.push(Row {
                stat,
                i,
                j,
                value: point_value(&e.est, stat, i, j),
                interval: None,
            });
        }
    }
    write_rows(&mut report, &p.names(), &rows, false);
    report.emit(a.pipeline.output.as_deref())
}

pub fn infer(a: &InferArgs) -> Result<()> {
    if a.estimator != EstimatorKind::Mrc {
        return usage(format!("inference requires --estimator mrc, got {}", a.estimator.name()));
    }
    check_level(a.inference.level)?;
    let p = Pipeline::load(&a.pipeline)?;
    let e = run_estimator(&p, EstimatorKind::Mrc, 0.0, a.inference.triple.as_deref())?;
    let stats: Vec<Stat> = if a.stat.is_empty() { ALL_STATS.to_vec() } else { a.stat.clone() };
    intervals_report(&p, &a.pipeline, &a.inference, &stats, Report::new("infer"), e)
}

/// `gamma2=G,lambda=L1/L2` or `gamma2=G,lambda=full`.
fn parse_scenario(s: &str) -> Result<Scenario> {
    let mut gamma = None;
    let mut lambda = None;
    for part in s.split(',') {
        match part.split_once('=') {
            Some(("gamma2", v)) => gamma = v.trim().parse::<f64>().ok(),
            Some(("lambda", v)) => lambda = Some(v.trim().to_string()),
            _ => return usage(format!("bad scenario item '{part}' in '{s}'")),
        }
    }
    let gamma = match gamma {
        Some(g) if g >= 0.0 => g,
        _ => return usage(format!("scenario '{s}' needs gamma2 >= 0")),
    };
    match lambda.as_deref() {
        Some("full") => Ok(Scenario::full_grid(gamma)),
        Some(l) => {
            let ls: Vec<f64> = l
                .split('/')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .or_else(|_| usage(format!("bad intensities '{l}'")))?;
            if ls.len() != 2 || ls.iter().any(|&x| !(x >= 1.0)) {
                return usage(format!("scenario '{s}' needs two waiting times >= 1"));
            }
            Ok(Scenario::poisson(gamma, &ls))
        }
        None => usage(format!("scenario '{s}' needs lambda")),
    }
}

fn default_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for gamma in [0.0, 0.001, 0.01] {
        for l in [3.0, 5.0, 10.0, 30.0, 60.0] {
            out.push(Scenario::poisson(gamma, &[l, 2.0 * l]));
        }
    }
    out
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    if a.reps == 0 {
        return usage("--reps must be at least 1");
    }
    let weight = WeightScheme::parse(&a.weight).or_else(|e| usage(e.to_string()))?;
    let scenarios = if a.scenario.is_empty() {
        default_scenarios()
    } else {
        a.scenario.iter().map(|s| parse_scenario(s)).collect::<Result<_>>()?
    };
    let estimators: Vec<McEstimator> = a
        .estimators
        .split(',')
        .map(|s| McEstimator::parse(s, a.theta, a.delta).or_else(|e| usage(e.to_string())))
        .collect::<Result<_>>()?;
    let model = SvModelConfig {
        grid_n: a.grid_n,
        ..SvModelConfig::standard()
    };
    model.validate().or_else(|e| usage(e.to_string()))?;
    let summary = run_monte_carlo(&model, &scenarios, &estimators, &weight, a.reps, a.seed)?;

    let mut report = Report::new("simulate");
    report.set("reps", a.reps);
    report.set("seed", a.seed);
    report.set("grid_n", a.grid_n);
    report.set("theta", a.theta);
    report.set("delta", a.delta);
    report.set("weight", weight.name());
    report.set(
        "estimators",
        estimators.iter().map(McEstimator::label).collect::<Vec<_>>().join(","),
    );
    report.set(
        "scenarios",
        scenarios
            .iter()
            .map(|s| format!("gamma2={}/lambda={}", s.gamma_sq, s.lambda_label()))
            .collect::<Vec<_>>()
            .join(";"),
    );
    let failures: usize = summary.scenarios.iter().flat_map(|s| &s.cells).map(|c| c.failures).sum();
    report.set("failed_estimates", failures);
    if failures > 0 {
        eprintln!("mrcov: warning: {failures} estimates failed and were excluded");
    }
    report.body(&summary.to_csv());
    report.emit(a.output.as_deref())
}
