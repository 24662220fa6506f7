//! Plain-text serialisation of tick series.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::TickSeries;

#[derive(Deserialize)]
struct Row {
    time_fraction: f64,
    log_price: f64,
}

/// Reads `time_fraction,log_price` rows.
pub fn read_series<R: Read>(reader: R, asset_id: &str) -> Result<TickSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut times = Vec::new();
    let mut prices = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("{asset_id}: row {}: {e}", i + 2)))?;
        times.push(row.time_fraction);
        prices.push(row.log_price);
    }
    TickSeries::new(asset_id, times, prices)
}

/// Reads a series file, naming the asset after the file stem.
pub fn read_series_file(path: &Path) -> Result<TickSeries> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "asset".into());
    read_series(File::open(path)?, &id)
}

/// Writes `time_fraction,log_price` rows with round-trip float formatting.
pub fn write_series<W: Write>(mut writer: W, series: &TickSeries) -> Result<()> {
    writeln!(writer, "time_fraction,log_price")?;
    for (t, p) in series.times().iter().zip(series.log_prices()) {
        writeln!(writer, "{t},{p}")?;
    }
    Ok(())
}
