use crate::error::{Error, Result};
use crate::types::TickSeries;

/// Cluster and spacing summaries of a set of sampling schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeDiagnostics {
    /// Largest number of one series' ticks inside a single return interval
    /// `(t_{i-1}, t_i]` of another series.
    pub k_hat: usize,
    /// Largest ratio of maximum to minimum tick spacing within a series.
    pub c_hat: f64,
    pub warnings: Vec<String>,
}

/// Clustering above this many ticks per interval is reported.
pub const K_HAT_WARN: usize = 100;
/// Spacing ratios above this are reported.
pub const C_HAT_WARN: f64 = 1e4;

pub fn scheme_diagnostics(series: &[TickSeries]) -> Result<SchemeDiagnostics> {
    if series.len() < 2 {
        return Err(Error::InvalidConfig("diagnostics need at least 2 series".into()));
    }
    let mut k_hat = 0;
    for (k, a) in series.iter().enumerate() {
        for (l, b) in series.iter().enumerate() {
            if k == l {
                continue;
            }
            let tb = b.times();
            for w in a.times().windows(2) {
                // Points of b in (w[0], w[1]].
                let lo = tb.partition_point(|&t| t <= w[0]);
                let hi = tb.partition_point(|&t| t <= w[1]);
                k_hat = k_hat.max(hi - lo);
            }
        }
    }
    let c_hat = series
        .iter()
        .map(|s| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for w in s.times().windows(2) {
                let gap = w[1] - w[0];
                lo = lo.min(gap);
                hi = hi.max(gap);
            }
            hi / lo
        })
        .fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if k_hat > K_HAT_WARN {
        warnings.push(format!("one series clusters {k_hat} ticks inside another's interval"));
    }
    if c_hat > C_HAT_WARN {
        warnings.push(format!("tick spacing ratio {c_hat:.3e} is extreme"));
    }
    Ok(SchemeDiagnostics {
        k_hat,
        c_hat,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TickSeries {
        let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        TickSeries::new("g", t, vec![0.0; n + 1]).unwrap()
    }

    #[test]
    fn identical_grids() {
        let d = scheme_diagnostics(&[grid(50), grid(50)]).unwrap();
        assert_eq!(d.k_hat, 1);
        assert!((d.c_hat - 1.0).abs() < 1e-9);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn denser_series_clusters() {
        let d = scheme_diagnostics(&[grid(20), grid(200)]).unwrap();
        assert!((9..=11).contains(&d.k_hat), "{}", d.k_hat);
    }

    #[test]
    fn single_gap_ratio() {
        let s = TickSeries::new("s", vec![0.0, 0.1, 0.2, 0.5], vec![0.0; 4]).unwrap();
        let d = scheme_diagnostics(&[s, grid(10)]).unwrap();
        assert!((d.c_hat - 3.0).abs() < 1e-9);
        assert!(scheme_diagnostics(&[grid(3)]).is_err());
    }
}
