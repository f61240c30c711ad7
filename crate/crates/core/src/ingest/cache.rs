//! Self-describing text cache of an aligned dataset.
//!
//! ```text
//! # arxflow-dataset 1
//! # t0 = 1410566400
//! # dt = 1.0
//! u,p1,p2
//! 12.5,0.3,1.0
//! ...
//! ```
//!
//! The first column is the output series. Values use Rust's shortest
//! round-trip float formatting, so a write/read cycle is bit-exact.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::series::{MultiSeriesDataset, TimeSeries};

const MAGIC: &str = "# arxflow-dataset 1";

pub fn write_cache<W: Write>(dataset: &MultiSeriesDataset, mut out: W) -> Result<()> {
    let output = dataset.output();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# t0 = {}", output.t0())?;
    writeln!(out, "# dt = {:?}", output.dt())?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(dataset.all_series().map(TimeSeries::id))?;
    let columns: Vec<&[f64]> = dataset.all_series().map(TimeSeries::values).collect();
    let mut row = Vec::with_capacity(columns.len());
    for k in 0..dataset.len() {
        row.clear();
        row.extend(columns.iter().map(|c| format!("{:?}", c[k])));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn meta_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        what: "dataset cache",
        line,
        message: message.into(),
    }
}

fn meta_value<'a>(line: &'a str, key: &str, lineno: usize) -> Result<&'a str> {
    line.strip_prefix("# ")
        .and_then(|rest| rest.strip_prefix(key))
        .and_then(|rest| rest.trim_start().strip_prefix('='))
        .map(str::trim)
        .ok_or_else(|| meta_error(lineno, format!("expected `# {key} = ...`")))
}

pub fn read_cache(bytes: &[u8]) -> Result<MultiSeriesDataset> {
    let mut cursor = std::io::Cursor::new(bytes);
    let mut lines = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut line = String::new();
        cursor.read_line(&mut line)?;
        lines.push(line.trim_end_matches(['\r', '\n']).to_string());
    }
    if lines[0] != MAGIC {
        return Err(meta_error(1, format!("expected header {MAGIC:?}")));
    }
    let t0: i64 = meta_value(&lines[1], "t0", 2)?
        .parse()
        .map_err(|e| meta_error(2, format!("t0: {e}")))?;
    let dt: f64 = meta_value(&lines[2], "dt", 3)?
        .parse()
        .map_err(|e| meta_error(3, format!("dt: {e}")))?;

    let rest = &bytes[cursor.position() as usize..];
    let mut reader = csv::ReaderBuilder::new().from_reader(rest);
    let ids: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if ids.is_empty() {
        return Err(meta_error(4, "no series ids"));
    }
    let mut columns = vec![Vec::new(); ids.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != ids.len() {
            return Err(meta_error(
                row + 5,
                format!("expected {} fields, found {}", ids.len(), record.len()),
            ));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| meta_error(row + 5, format!("{field:?} is not a number")))?;
            columns[c].push(v);
        }
    }
    let mut series = ids
        .into_iter()
        .zip(columns)
        .map(|(id, values)| TimeSeries::new(id, t0, dt, values))
        .collect::<Result<Vec<_>>>()?;
    let output = series.remove(0);
    MultiSeriesDataset::new(output, series)
}
