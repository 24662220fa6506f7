use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Seconds since midnight from `HH:MM:SS`.
pub fn parse_hms(s: &str) -> Result<u32> {
    let bad = || Error::Parse(format!("bad timestamp '{s}', expected HH:MM:SS"));
    let mut parts = s.trim().split(':');
    let mut field = |max: u32| -> Result<u32> {
        let p = parts.next().ok_or_else(bad)?;
        if p.is_empty() || p.len() > 2 {
            return Err(bad());
        }
        let v: u32 = p.parse().map_err(|_| bad())?;
        if v > max {
            return Err(bad());
        }
        Ok(v)
    };
    let (h, m, sec) = (field(23)?, field(59)?, field(59)?);
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(h * 3600 + m * 60 + sec)
}

pub fn format_hms(t: u32) -> String {
    format!("{:02}:{:02}:{:02}", t / 3600, (t / 60) % 60, t % 60)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TradeRecord {
    #[serde(deserialize_with = "de_hms")]
    pub timestamp: u32,
    pub price: f64,
    pub size: f64,
    pub exch: String,
    pub corr: i64,
    #[serde(default)]
    pub cond: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct QuoteRecord {
    #[serde(deserialize_with = "de_hms")]
    pub timestamp: u32,
    pub bid: f64,
    pub ask: f64,
    pub bsize: f64,
    pub asize: f64,
    pub exch: String,
}

/// A raw trade or quote row.
#[derive(Debug, Clone, PartialEq)]
pub enum RawTickRecord {
    Trade(TradeRecord),
    Quote(QuoteRecord),
}

fn de_hms<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<u32, D::Error> {
    let s = String::deserialize(d)?;
    parse_hms(&s).map_err(serde::de::Error::custom)
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Parse(format!("row {}: {e}", i + 2))))
        .collect()
}

/// Reads `timestamp,price,size,exch,corr,cond` rows.
pub fn read_trades<R: Read>(reader: R) -> Result<Vec<TradeRecord>> {
    read_rows(reader)
}

/// Reads `timestamp,bid,ask,bsize,asize,exch` rows.
pub fn read_quotes<R: Read>(reader: R) -> Result<Vec<QuoteRecord>> {
    read_rows(reader)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hms_round_trip() {
        assert_eq!(parse_hms("09:30:00").unwrap(), 34_200);
        assert_eq!(parse_hms("16:00:01").unwrap(), 57_601);
        assert_eq!(format_hms(57_601), "16:00:01");
        for bad in ["9:30", "24:00:00", "09:60:00", "aa:bb:cc", "09:30:00:00", ""] {
            assert!(parse_hms(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_trade_rows() {
        let csv = "timestamp,price,size,exch,corr,cond\n09:30:01,10.5,100,N,0,\n09:30:02,10.6,50,T,1,Z\n";
        let rows = read_trades(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].cond, "");
        assert_eq!(rows[1].corr, 1);
        assert!(read_trades("timestamp,price\n09:30:01,x\n".as_bytes()).is_err());
    }

    #[test]
    fn parses_quote_rows() {
        let csv = "timestamp,bid,ask,bsize,asize,exch\n09:30:01,10.0,10.1,5,7,N\n";
        let rows = read_quotes(csv.as_bytes()).unwrap();
        assert_eq!(rows[0].ask, 10.1);
    }
}
