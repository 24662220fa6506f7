//! Mapping non-synchronous tick series onto a common grid.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{SyncScheme, SyncedPanel, TickSeries};

/// Grid times within this distance after a tick still see it.
const GRID_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMethod {
    RefreshTime,
    PreviousTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncSpec {
    pub method: SyncMethod,
    /// Number of calendar intervals for previous-tick sampling (390 is one minute).
    pub calendar_n: Option<usize>,
    /// Whether the calendar grid starts at time 0.
    pub include_open: bool,
}

impl SyncSpec {
    pub fn refresh_time() -> Self {
        Self {
            method: SyncMethod::RefreshTime,
            calendar_n: None,
            include_open: false,
        }
    }

    pub fn calendar(calendar_n: usize) -> Self {
        Self {
            method: SyncMethod::PreviousTick,
            calendar_n: Some(calendar_n),
            include_open: true,
        }
    }

    /// Parses `refresh` or `calendar:N`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "refresh" {
            return Ok(Self::refresh_time());
        }
        if let Some(n) = s.strip_prefix("calendar:") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad calendar size in '{s}'")))?;
            if n < 2 {
                return Err(Error::InvalidConfig("calendar grid needs N >= 2".into()));
            }
            return Ok(Self::calendar(n));
        }
        Err(Error::InvalidConfig(format!(
            "unknown sync scheme '{s}' (expected refresh or calendar:N)"
        )))
    }
}

impl std::fmt::Display for SyncSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.method, self.calendar_n) {
            (SyncMethod::PreviousTick, Some(n)) => write!(f, "calendar:{n}"),
            _ => f.write_str("refresh"),
        }
    }
}

pub fn synchronize(series: &[TickSeries], spec: &SyncSpec) -> Result<SyncedPanel> {
    match spec.method {
        SyncMethod::RefreshTime => refresh_time(series),
        SyncMethod::PreviousTick => previous_tick(series, spec),
    }
}

/// Refresh-time sampling: each grid point is the first moment by which every
/// asset has traded since the previous one.
pub fn refresh_time(series: &[TickSeries]) -> Result<SyncedPanel> {
    if series.is_empty() {
        return Err(Error::InvalidConfig("refresh time needs at least one series".into()));
    }
    let mut grid = Vec::new();
    let mut tau = series
        .iter()
        .map(|s| s.times()[0])
        .fold(f64::NEG_INFINITY, f64::max);
    loop {
        grid.push(tau);
        let mut next = f64::NEG_INFINITY;
        for s in series {
            let t = s.times();
            let idx = t.partition_point(|&x| x <= tau);
            match t.get(idx) {
                Some(&x) => next = next.max(x),
                None => {
                    next = f64::NAN;
                    break;
                }
            }
        }
        if next.is_nan() {
            break;
        }
        tau = next;
    }
    if grid.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "refresh time produced {} grid point(s)",
            grid.len()
        )));
    }
    let prices = DMatrix::from_fn(grid.len(), series.len(), |i, c| {
        series[c]
            .price_at_or_before(grid[i])
            .expect("refresh times follow every first tick")
    });
    SyncedPanel::new(grid, prices, SyncScheme::RefreshTime)
}

/// Previous-tick sampling on the grid `g / calendar_n`. Leading grid points
/// before some asset's first tick are dropped, never back-filled.
pub fn previous_tick(series: &[TickSeries], spec: &SyncSpec) -> Result<SyncedPanel> {
    if series.is_empty() {
        return Err(Error::InvalidConfig("previous tick needs at least one series".into()));
    }
    let n = spec
        .calendar_n
        .ok_or_else(|| Error::InvalidConfig("previous tick needs a calendar size".into()))?;
    if n < 2 {
        return Err(Error::InvalidConfig("calendar grid needs N >= 2".into()));
    }
    let first = if spec.include_open { 0 } else { 1 };
    let mut grid = Vec::with_capacity(n + 1);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for g in first..=n {
        let t = g as f64 / n as f64;
        let row: Option<Vec<f64>> = series
            .iter()
            .map(|s| s.price_at_or_before(t + GRID_EPS))
            .collect();
        match row {
            Some(row) => {
                grid.push(t);
                rows.push(row);
            }
            None if grid.is_empty() => continue,
            None => unreachable!("a price seen once stays available"),
        }
    }
    if grid.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "calendar grid has {} usable point(s)",
            grid.len()
        )));
    }
    let prices = DMatrix::from_fn(grid.len(), series.len(), |i, c| rows[i][c]);
    SyncedPanel::new(grid, prices, SyncScheme::Calendar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(times: &[f64], prices: &[f64]) -> TickSeries {
        TickSeries::new("x", times.to_vec(), prices.to_vec()).unwrap()
    }

    #[test]
    fn refresh_hand_trace() {
        let a = ts(&[1.0 / 6.0, 3.0 / 6.0, 5.0 / 6.0], &[1.0, 3.0, 5.0]);
        let b = ts(&[2.0 / 6.0, 4.0 / 6.0, 1.0], &[2.0, 4.0, 6.0]);
        let p = refresh_time(&[a, b]).unwrap();
        assert_eq!(p.grid_times(), &[2.0 / 6.0, 4.0 / 6.0, 1.0]);
        assert_eq!(p.log_prices().column(0).as_slice(), &[1.0, 3.0, 5.0]);
        assert_eq!(p.log_prices().column(1).as_slice(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn refresh_on_identical_grids_is_identity() {
        let t = [0.0, 0.25, 0.5, 1.0];
        let a = ts(&t, &[1.0, 2.0, 3.0, 4.0]);
        let b = ts(&t, &[5.0, 6.0, 7.0, 8.0]);
        let p = refresh_time(&[a, b]).unwrap();
        assert_eq!(p.grid_times(), &t);
        assert_eq!(p.log_prices()[(3, 1)], 8.0);
        assert_eq!(p.scheme(), SyncScheme::RefreshTime);
    }

    #[test]
    fn previous_tick_lookup() {
        let a = ts(&[0.5 / 3.0, 2.5 / 3.0], &[1.0, 2.0]);
        let spec = SyncSpec {
            include_open: false,
            ..SyncSpec::calendar(3)
        };
        let p = previous_tick(std::slice::from_ref(&a), &spec).unwrap();
        assert_eq!(p.log_prices().column(0).as_slice(), &[1.0, 1.0, 2.0]);
        // With the open included, time 0 has no prior tick and is trimmed.
        let p = previous_tick(&[a], &SyncSpec::calendar(3)).unwrap();
        assert_eq!(p.n(), 2);
    }

    #[test]
    fn tick_on_grid_point_is_used() {
        let a = ts(&[0.0, 0.5, 1.0], &[1.0, 2.0, 3.0]);
        let p = previous_tick(&[a], &SyncSpec::calendar(2)).unwrap();
        assert_eq!(p.log_prices().column(0).as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let a = ts(&[0.9, 0.95], &[1.0, 2.0]);
        assert!(previous_tick(std::slice::from_ref(&a), &SyncSpec::calendar(2)).is_err());
        let b = ts(&[0.96, 0.97], &[1.0, 2.0]);
        assert!(refresh_time(&[a, b]).is_err());
    }

    #[test]
    fn parse_specs() {
        assert_eq!(SyncSpec::parse("refresh").unwrap().method, SyncMethod::RefreshTime);
        assert_eq!(SyncSpec::parse("calendar:390").unwrap().calendar_n, Some(390));
        assert!(SyncSpec::parse("calendar:1").is_err());
        assert!(SyncSpec::parse("linear").is_err());
        assert_eq!(SyncSpec::parse("calendar:78").unwrap().to_string(), "calendar:78");
    }
}
