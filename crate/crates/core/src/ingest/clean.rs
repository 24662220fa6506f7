use std::collections::HashSet;

use super::records::{parse_hms, QuoteRecord, TradeRecord};
use super::report::{CleaningReport, Rule};
use crate::error::{Error, Result};
use crate::types::TickSeries;

/// Settings shared by the trade and quote pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct CleaningConfig {
    /// Session bounds in seconds since midnight, both inclusive.
    pub open: u32,
    pub close: u32,
    pub exchange: String,
    /// Sale conditions treated as normal.
    pub allowed_conditions: HashSet<String>,
    /// Order in which rules run; rules that do not apply to a record kind are skipped.
    pub rule_order: Vec<Rule>,
    /// Quotes with spread above this multiple of the median spread are dropped.
    pub wide_spread_multiple: f64,
    pub asset_id: String,
}

impl CleaningConfig {
    /// 09:30:00 to 16:00:00 on `exchange`, allowing conditions "", "@", "E", "F".
    pub fn new(exchange: impl Into<String>) -> Self {
        Self {
            open: parse_hms("09:30:00").expect("valid literal"),
            close: parse_hms("16:00:00").expect("valid literal"),
            exchange: exchange.into(),
            allowed_conditions: ["", "@", "E", "F"].iter().map(|s| s.to_string()).collect(),
            rule_order: vec![
                Rule::Exchange,
                Rule::Session,
                Rule::ZeroPrice,
                Rule::Correction,
                Rule::NegativeSpread,
                Rule::WideSpread,
            ],
            wide_spread_multiple: 10.0,
            asset_id: "asset".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.close <= self.open {
            return Err(Error::InvalidConfig("session close must follow open".into()));
        }
        if !(self.wide_spread_multiple > 0.0) {
            return Err(Error::InvalidConfig("spread multiple must be positive".into()));
        }
        let unique: HashSet<Rule> = self.rule_order.iter().copied().collect();
        if unique.len() != self.rule_order.len() {
            return Err(Error::InvalidConfig("rule order lists a rule twice".into()));
        }
        Ok(())
    }

    fn time_fraction(&self, t: u32) -> f64 {
        (t - self.open) as f64 / (self.close - self.open) as f64
    }
}

fn apply<T>(rows: &mut Vec<T>, keep: impl Fn(&T) -> bool) -> usize {
    let before = rows.len();
    rows.retain(keep);
    before - rows.len()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Groups rows with equal timestamps (rows must be sorted by time) and
/// reduces each group with `merge`.
fn aggregate<T>(rows: &[T], time: impl Fn(&T) -> u32, merge: impl Fn(&[T]) -> f64) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let t = time(&rows[start]);
        let mut end = start + 1;
        while end < rows.len() && time(&rows[end]) == t {
            end += 1;
        }
        out.push((t, merge(&rows[start..end])));
        start = end;
    }
    out
}

/// Size-weighted mean, or the plain mean when sizes sum to zero.
fn weighted(values: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let total: f64 = values.clone().map(|(_, w)| w).sum();
    if total > 0.0 {
        values.map(|(v, w)| v * w).sum::<f64>() / total
    } else {
        let n = values.clone().count() as f64;
        values.map(|(v, _)| v).sum::<f64>() / n
    }
}

fn finish(config: &CleaningConfig, points: Vec<(u32, f64)>, report: &mut CleaningReport) -> Result<TickSeries> {
    report.output = points.len();
    if points.is_empty() {
        return Err(Error::Ingest(format!("{}: no rows survive cleaning", config.asset_id)));
    }
    if points.len() < 2 {
        return Err(Error::Ingest(format!("{}: only one tick survives cleaning", config.asset_id)));
    }
    let times = points.iter().map(|(t, _)| config.time_fraction(*t)).collect();
    let prices = points.iter().map(|(_, p)| p.ln()).collect();
    TickSeries::new(config.asset_id.clone(), times, prices)
}

/// Applies the trade rules and same-second VWAP aggregation. The report is
/// returned even when the output is too short to form a series.
pub fn clean_trades_report(records: &[TradeRecord], config: &CleaningConfig) -> Result<(Vec<(u32, f64)>, CleaningReport)> {
    config.validate()?;
    let mut rows: Vec<TradeRecord> = records.to_vec();
    let mut report = CleaningReport {
        input: rows.len(),
        ..Default::default()
    };
    for rule in &config.rule_order {
        let removed = match rule {
            Rule::Exchange => apply(&mut rows, |r| r.exch == config.exchange),
            Rule::Session => apply(&mut rows, |r| r.timestamp >= config.open && r.timestamp <= config.close),
            Rule::ZeroPrice => apply(&mut rows, |r| r.price > 0.0),
            Rule::Correction => apply(&mut rows, |r| r.corr == 0 && config.allowed_conditions.contains(r.cond.trim())),
            Rule::NegativeSpread | Rule::WideSpread => continue,
        };
        report.deletions.push((*rule, removed));
    }
    rows.sort_by_key(|r| r.timestamp);
    let points = aggregate(&rows, |r| r.timestamp, |g| weighted(g.iter().map(|r| (r.price, r.size))));
    report.aggregated = rows.len() - points.len();
    report.output = points.len();
    Ok((points, report))
}

/// Cleans trades into a log-price series on the session clock.
pub fn clean_trades(records: &[TradeRecord], config: &CleaningConfig) -> Result<(TickSeries, CleaningReport)> {
    let (points, mut report) = clean_trades_report(records, config)?;
    let series = finish(config, points, &mut report)?;
    Ok((series, report))
}

/// Applies the quote rules and same-second size-weighted aggregation of
/// each side; the output price is the log mid-quote.
pub fn clean_quotes_report(records: &[QuoteRecord], config: &CleaningConfig) -> Result<(Vec<(u32, f64)>, CleaningReport)> {
    config.validate()?;
    let mut rows: Vec<QuoteRecord> = records.to_vec();
    let mut report = CleaningReport {
        input: rows.len(),
        ..Default::default()
    };
    for rule in &config.rule_order {
        let removed = match rule {
            Rule::Exchange => apply(&mut rows, |r| r.exch == config.exchange),
            Rule::Session => apply(&mut rows, |r| r.timestamp >= config.open && r.timestamp <= config.close),
            Rule::ZeroPrice => apply(&mut rows, |r| r.bid > 0.0 && r.ask > 0.0),
            Rule::NegativeSpread => apply(&mut rows, |r| r.ask >= r.bid),
            Rule::WideSpread => match median(rows.iter().map(|r| r.ask - r.bid).collect()) {
                Some(m) => {
                    let limit = config.wide_spread_multiple * m;
                    apply(&mut rows, |r| r.ask - r.bid <= limit)
                }
                None => 0,
            },
            Rule::Correction => continue,
        };
        report.deletions.push((*rule, removed));
    }
    rows.sort_by_key(|r| r.timestamp);
    let points = aggregate(
        &rows,
        |r| r.timestamp,
        |g| {
            let bid = weighted(g.iter().map(|r| (r.bid, r.bsize)));
            let ask = weighted(g.iter().map(|r| (r.ask, r.asize)));
            0.5 * (bid + ask)
        },
    );
    report.aggregated = rows.len() - points.len();
    report.output = points.len();
    Ok((points, report))
}

/// Cleans quotes into a log mid-quote series on the session clock.
pub fn clean_quotes(records: &[QuoteRecord], config: &CleaningConfig) -> Result<(TickSeries, CleaningReport)> {
    let (points, mut report) = clean_quotes_report(records, config)?;
    let series = finish(config, points, &mut report)?;
    Ok((series, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trade(t: &str, price: f64, size: f64) -> TradeRecord {
        TradeRecord {
            timestamp: parse_hms(t).unwrap(),
            price,
            size,
            exch: "N".into(),
            corr: 0,
            cond: String::new(),
        }
    }

    fn quote(t: &str, bid: f64, ask: f64) -> QuoteRecord {
        QuoteRecord {
            timestamp: parse_hms(t).unwrap(),
            bid,
            ask,
            bsize: 1.0,
            asize: 1.0,
            exch: "N".into(),
        }
    }

    #[test]
    fn same_second_vwap() {
        let rows = vec![trade("10:00:00", 10.0, 1.0), trade("10:00:00", 11.0, 3.0), trade("11:00:00", 12.0, 1.0)];
        let (s, rep) = clean_trades(&rows, &CleaningConfig::new("N")).unwrap();
        assert_eq!(s.log_prices()[0], 10.75f64.ln());
        assert_eq!(rep.aggregated, 1);
        assert!(rep.balances());
    }

    #[test]
    fn zero_volume_falls_back_to_mean() {
        let rows = vec![trade("10:00:00", 10.0, 0.0), trade("10:00:00", 12.0, 0.0), trade("11:00:00", 12.0, 1.0)];
        let (s, _) = clean_trades(&rows, &CleaningConfig::new("N")).unwrap();
        assert_eq!(s.log_prices()[0], 11.0f64.ln());
    }

    #[test]
    fn session_bounds_inclusive() {
        let rows = vec![
            trade("09:29:59", 10.0, 1.0),
            trade("09:30:00", 10.0, 1.0),
            trade("16:00:00", 10.0, 1.0),
            trade("16:00:01", 10.0, 1.0),
        ];
        let (s, rep) = clean_trades(&rows, &CleaningConfig::new("N")).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0]);
        assert_eq!(rep.deleted_by(Rule::Session), 2);
    }

    #[test]
    fn abnormal_conditions_and_corrections() {
        let mut a = trade("10:00:00", 10.0, 1.0);
        a.cond = "Z".into();
        let mut b = trade("10:00:01", 10.0, 1.0);
        b.corr = 2;
        let mut c = trade("10:00:02", 10.0, 1.0);
        c.cond = "F".into();
        let rows = vec![a, b, c, trade("10:00:03", 10.0, 1.0)];
        let (_, rep) = clean_trades(&rows, &CleaningConfig::new("N")).unwrap();
        assert_eq!(rep.deleted_by(Rule::Correction), 2);
        assert_eq!(rep.output, 2);
    }

    #[test]
    fn quote_spread_rules() {
        let mut rows = vec![quote("10:00:00", 10.0, 9.0)];
        for k in 0..9 {
            rows.push(quote(&format!("10:00:{:02}", k + 1), 10.0, 10.01));
        }
        rows.push(quote("10:01:00", 10.0, 10.12));
        let (s, rep) = clean_quotes(&rows, &CleaningConfig::new("N")).unwrap();
        assert_eq!(rep.deleted_by(Rule::NegativeSpread), 1);
        assert_eq!(rep.deleted_by(Rule::WideSpread), 1);
        assert_eq!(s.len(), 9);
        assert!((s.log_prices()[0] - 10.005f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_output_is_an_error() {
        let rows = vec![trade("10:00:00", 0.0, 1.0)];
        assert!(matches!(clean_trades(&rows, &CleaningConfig::new("N")), Err(Error::Ingest(_))));
        assert!(clean_trades(&[], &CleaningConfig::new("N")).is_err());
    }
}
