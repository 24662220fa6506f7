//! Cleaning of raw trade and quote files into tick series.

mod clean;
mod noise_ratio;
mod records;
mod report;

pub use clean::{clean_quotes, clean_quotes_report, clean_trades, clean_trades_report, CleaningConfig};
pub use noise_ratio::noise_ratio;
pub use records::{format_hms, parse_hms, read_quotes, read_trades, QuoteRecord, RawTickRecord, TradeRecord};
pub use report::{CleaningReport, Rule};
