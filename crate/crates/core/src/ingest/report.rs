use std::fmt;
use std::fmt::Write as _;

/// Filter rules, in the order they may be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Keep a single exchange.
    Exchange,
    /// Keep timestamps inside the session.
    Session,
    /// Drop non-positive prices (or bids/asks).
    ZeroPrice,
    /// Drop corrected trades and abnormal sale conditions.
    Correction,
    /// Drop quotes with ask below bid.
    NegativeSpread,
    /// Drop quotes whose spread exceeds a multiple of the day's median.
    WideSpread,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Exchange => "exchange",
            Rule::Session => "session",
            Rule::ZeroPrice => "zero_price",
            Rule::Correction => "correction",
            Rule::NegativeSpread => "negative_spread",
            Rule::WideSpread => "wide_spread",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        [
            Rule::Exchange,
            Rule::Session,
            Rule::ZeroPrice,
            Rule::Correction,
            Rule::NegativeSpread,
            Rule::WideSpread,
        ]
        .into_iter()
        .find(|r| r.name() == s.trim())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row accounting of one cleaning run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleaningReport {
    pub input: usize,
    pub output: usize,
    /// Rows deleted by each rule, in application order.
    pub deletions: Vec<(Rule, usize)>,
    /// Rows merged away by same-timestamp aggregation.
    pub aggregated: usize,
}

impl CleaningReport {
    pub fn deleted_by(&self, rule: Rule) -> usize {
        self.deletions
            .iter()
            .filter(|(r, _)| *r == rule)
            .map(|(_, c)| c)
            .sum()
    }

    /// `input = output + deletions + aggregated`.
    pub fn balances(&self) -> bool {
        let deleted: usize = self.deletions.iter().map(|(_, c)| c).sum();
        self.input == self.output + deleted + self.aggregated
    }

    /// `rule,count` lines, bracketed by the input and output totals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rule,count\n");
        let _ = writeln!(out, "input,{}", self.input);
        for (r, c) in &self.deletions {
            let _ = writeln!(out, "{r},{c}");
        }
        let _ = writeln!(out, "aggregation,{}", self.aggregated);
        let _ = writeln!(out, "output,{}", self.output);
        out
    }
}
