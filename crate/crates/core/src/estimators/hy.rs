//! Hayashi-Yoshida estimators for non-synchronous data.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preavg::{preaverage_slice, WeightScheme};
use crate::types::{resolve_kn, CovEstimate, EstimateWarning, PreAvgConfig, TickSeries};

/// `sum_i sum_j x_i y_j` over pairs whose half-open intervals
/// `(a_lo[i], a_hi[i]]` and `(b_lo[j], b_hi[j]]` intersect.
///
/// All four bound arrays must be non-decreasing, which makes the set of
/// partners of each `i` a contiguous run of `j` that moves forward with `i`.
/// The accumulation order (`i` ascending, then `j` ascending) is the same
/// as a plain double loop that skips non-overlapping pairs.
pub(crate) fn overlap_sum(a_lo: &[f64], a_hi: &[f64], x: &[f64], b_lo: &[f64], b_hi: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut first = 0;
    let mut end = 0;
    for i in 0..x.len() {
        while first < y.len() && b_hi[first] <= a_lo[i] {
            first += 1;
        }
        if end < first {
            end = first;
        }
        while end < y.len() && b_lo[end] < a_hi[i] {
            end += 1;
        }
        for j in first..end {
            acc += x[i] * y[j];
        }
    }
    acc
}

/// Classic Hayashi-Yoshida covariance of two tick series.
pub fn hy_classic(a: &TickSeries, b: &TickSeries) -> f64 {
    let (ta, tb) = (a.times(), b.times());
    overlap_sum(
        &ta[..ta.len() - 1],
        &ta[1..],
        &a.returns(),
        &tb[..tb.len() - 1],
        &tb[1..],
        &b.returns(),
    )
}

/// Classic Hayashi-Yoshida matrix; the diagonal is each series' realised variance.
pub fn hy_classic_cov(series: &[TickSeries]) -> Result<CovEstimate> {
    if series.is_empty() {
        return Err(Error::InvalidConfig("no series given".into()));
    }
    let d = series.len();
    let entries: Vec<(usize, usize, f64)> = pairs(d)
        .into_par_iter()
        .map(|(k, l)| (k, l, hy_classic(&series[k], &series[l])))
        .collect();
    let mut m = DMatrix::zeros(d, d);
    for (k, l, v) in entries {
        m[(k, l)] = v;
        m[(l, k)] = v;
    }
    let n = series.iter().map(TickSeries::len).sum();
    let mut est = CovEstimate::new(m, "hy", n);
    est.flag_definiteness();
    Ok(est)
}

fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|k| (k..d).map(move |l| (k, l))).collect()
}

/// Pre-averaged returns of one series together with their time spans.
#[derive(Debug, Clone)]
pub struct PreaveragedTicks {
    /// `Ybar_i`, `i = 0..=m-kn+1` for `m` tick returns.
    pub values: Vec<f64>,
    /// `t_i`.
    pub start: Vec<f64>,
    /// `t_{min(i + kn, m)}`.
    pub end: Vec<f64>,
}

/// Pre-averages a tick series in tick time. The last windows would reach
/// past the final tick; their spans are clipped to it.
pub fn preaverage_ticks(series: &TickSeries, kn: usize, scheme: &WeightScheme) -> Result<PreaveragedTicks> {
    if kn < 2 || series.len() < kn {
        return Err(Error::WindowOutOfRange {
            kn,
            n: series.len(),
        });
    }
    let c = scheme.finite_sample(kn)?;
    let values = preaverage_slice(&series.returns(), &c.weights);
    let t = series.times();
    let m = t.len() - 1;
    let start = (0..values.len()).map(|i| t[i]).collect();
    let end = (0..values.len()).map(|i| t[(i + kn).min(m)]).collect();
    Ok(PreaveragedTicks { values, start, end })
}

/// One entry of the pre-averaged Hayashi-Yoshida matrix at window `kn`.
pub fn hy_preavg_pair(a: &TickSeries, b: &TickSeries, kn: usize, scheme: &WeightScheme) -> Result<f64> {
    let pa = preaverage_ticks(a, kn, scheme)?;
    let pb = preaverage_ticks(b, kn, scheme)?;
    let norm = scheme.finite_sample(kn)?.psi_hy * kn as f64;
    let acc = overlap_sum(&pa.start, &pa.end, &pa.values, &pb.start, &pb.end, &pb.values);
    Ok(acc / (norm * norm))
}

/// Pre-averaged Hayashi-Yoshida covariance matrix.
///
/// A single window `kn` is resolved from the total number of observations
/// across all series and applied to every pair.
pub fn hy_preavg(series: &[TickSeries], config: &PreAvgConfig, scheme: &WeightScheme) -> Result<CovEstimate> {
    if !config.is_balanced() {
        return Err(Error::InvalidConfig("pre-averaged HY needs delta = 0".into()));
    }
    if series.is_empty() {
        return Err(Error::InvalidConfig("no series given".into()));
    }
    let n: usize = series.iter().map(TickSeries::len).sum();
    let w = resolve_kn(config, n)?;
    let kn = w.kn;
    if let Some(s) = series.iter().find(|s| s.len() < kn) {
        return Err(Error::InsufficientData(format!(
            "{} has {} observations, fewer than kn={kn}",
            s.asset_id(),
            s.len()
        )));
    }
    let pre: Vec<PreaveragedTicks> = series
        .iter()
        .map(|s| preaverage_ticks(s, kn, scheme))
        .collect::<Result<_>>()?;
    let norm = scheme.finite_sample(kn)?.psi_hy * kn as f64;
    let d = series.len();
    let entries: Vec<(usize, usize, f64)> = pairs(d)
        .into_par_iter()
        .map(|(k, l)| {
            let (a, b) = (&pre[k], &pre[l]);
            let acc = overlap_sum(&a.start, &a.end, &a.values, &b.start, &b.end, &b.values);
            (k, l, acc / (norm * norm))
        })
        .collect();
    let mut m = DMatrix::zeros(d, d);
    for (k, l, v) in entries {
        m[(k, l)] = v;
        m[(l, k)] = v;
    }
    let mut est = CovEstimate::new(m, "hy-preavg", n);
    est.kn_used = Some(kn);
    est.theta_used = Some(kn as f64 / (n as f64).sqrt());
    est.weight = Some(scheme.name().to_string());
    if w.clamped {
        est.warnings.push(EstimateWarning::WindowClamped);
    }
    est.flag_definiteness();
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(times: &[f64], prices: &[f64]) -> TickSeries {
        TickSeries::new("x", times.to_vec(), prices.to_vec()).unwrap()
    }

    fn brute(a_lo: &[f64], a_hi: &[f64], x: &[f64], b_lo: &[f64], b_hi: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            for j in 0..y.len() {
                if a_lo[i] < b_hi[j] && b_lo[j] < a_hi[i] {
                    acc += x[i] * y[j];
                }
            }
        }
        acc
    }

    #[test]
    fn identical_grids_give_realised_covariance() {
        let t = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let a = series(&t, &[0.0, 1.0, 0.5, 0.7, 0.1, 0.3]);
        let b = series(&t, &[1.0, 0.2, 0.4, 0.0, 0.9, 0.6]);
        let (ra, rb) = (a.returns(), b.returns());
        let rc: f64 = ra.iter().zip(&rb).map(|(x, y)| x * y).sum();
        assert!((hy_classic(&a, &b) - rc).abs() < 1e-15);
    }

    #[test]
    fn alternating_ticks_by_hand() {
        // a: (0,.2], (.2,.4], (.4,.6] ; b: (.1,.3], (.3,.5], (.5,.7]
        let a = series(&[0.0, 0.2, 0.4, 0.6], &[0.0, 1.0, 3.0, 6.0]);
        let b = series(&[0.1, 0.3, 0.5, 0.7], &[0.0, 10.0, 30.0, 60.0]);
        // Overlaps: (0,0), (1,0), (1,1), (2,1), (2,2).
        let expect = 1.0 * 10.0 + 2.0 * 10.0 + 2.0 * 20.0 + 3.0 * 20.0 + 3.0 * 30.0;
        assert_eq!(hy_classic(&a, &b), expect);
    }

    #[test]
    fn touching_endpoints_do_not_overlap() {
        let a = series(&[0.0, 0.5], &[0.0, 1.0]);
        let b = series(&[0.5, 1.0], &[0.0, 1.0]);
        assert_eq!(hy_classic(&a, &b), 0.0);
    }

    #[test]
    fn sweep_matches_double_loop_exactly() {
        let mut state = 17u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let mk = |len: usize, next: &mut dyn FnMut() -> f64| {
                let mut lo: Vec<f64> = (0..len).map(|_| next()).collect();
                lo.sort_by(f64::total_cmp);
                let mut hi: Vec<f64> = lo.iter().map(|v| v + 0.2 * next()).collect();
                for k in 1..len {
                    hi[k] = hi[k].max(hi[k - 1]);
                }
                let v: Vec<f64> = (0..len).map(|_| next() - 0.5).collect();
                (lo, hi, v)
            };
            let (al, ah, x) = mk(1 + (next() * 30.0) as usize, &mut next);
            let (bl, bh, y) = mk(1 + (next() * 30.0) as usize, &mut next);
            let fast = overlap_sum(&al, &ah, &x, &bl, &bh, &y);
            let slow = brute(&al, &ah, &x, &bl, &bh, &y);
            assert_eq!(fast.to_bits(), slow.to_bits());
        }
    }

    #[test]
    fn psi_hy_of_min_weight() {
        assert_eq!(WeightScheme::min().constants().psi_hy, 0.25);
    }

    #[test]
    fn short_series_rejected() {
        let a = series(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        let cfg = PreAvgConfig::balanced(1.0).with_kn(4);
        assert!(hy_preavg(&[a.clone(), a], &cfg, &WeightScheme::min()).is_err());
    }
}
