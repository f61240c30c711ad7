use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};

use super::align::RawSeries;
use super::find_column;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

const HOUR: i64 = 3600;

#[derive(Debug, Clone, PartialEq)]
pub enum TrafficCsvSchema {
    /// One row per (segment, day) with 24 hourly count columns, midnight first.
    Wide24 {
        segment_column: String,
        date_column: String,
        /// `chrono` format string, e.g. `%m/%d/%Y`.
        date_format: String,
        hour_columns: Vec<String>,
    },
    /// One row per (segment, hour).
    Long {
        segment_column: String,
        timestamp_column: String,
        /// `chrono` format string, e.g. `%Y-%m-%d %H:%M:%S`.
        timestamp_format: String,
        value_column: String,
    },
}

/// Hour column labels in the NYC volume-count export layout,
/// `12:00-1:00 AM` through `11:00-12:00 PM`.
pub fn nyc_hour_columns() -> Vec<String> {
    (0..24)
        .map(|h: u32| {
            let clock = |x: u32| if x % 12 == 0 { 12 } else { x % 12 };
            let suffix = if h < 12 { "AM" } else { "PM" };
            format!("{}:00-{}:00 {}", clock(h), clock(h + 1), suffix)
        })
        .collect()
}

impl TrafficCsvSchema {
    /// NYC export layout: `Segment ID`, `Date` (`%m/%d/%Y`) and 24 hour columns.
    pub fn nyc_wide() -> Self {
        TrafficCsvSchema::Wide24 {
            segment_column: "Segment ID".into(),
            date_column: "Date".into(),
            date_format: "%m/%d/%Y".into(),
            hour_columns: nyc_hour_columns(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TrafficCsvSchema::Wide24 { hour_columns, .. } = self {
            if hour_columns.len() != 24 {
                return Err(Error::SchemaMismatch(format!(
                    "wide format needs 24 hour columns, got {}",
                    hour_columns.len()
                )));
            }
        }
        Ok(())
    }
}

/// One hourly series per segment, ordered by segment id. Any missing hour is
/// an error; use [`load_traffic_raw`] to keep gaps for later alignment.
pub fn load_traffic(csv_bytes: &[u8], schema: &TrafficCsvSchema) -> Result<Vec<TimeSeries>> {
    load_traffic_raw(csv_bytes, schema)?
        .into_iter()
        .map(RawSeries::into_series)
        .collect()
}

/// Like [`load_traffic`] but missing hours (empty cells, absent days) are kept
/// as `None`.
pub fn load_traffic_raw(csv_bytes: &[u8], schema: &TrafficCsvSchema) -> Result<Vec<RawSeries>> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_bytes);
    let headers = reader.headers()?.clone();
    let mut segments: BTreeMap<String, BTreeMap<i64, Option<f64>>> = BTreeMap::new();

    match schema {
        TrafficCsvSchema::Wide24 {
            segment_column,
            date_column,
            date_format,
            hour_columns,
        } => {
            let seg_idx = find_column(&headers, segment_column)?;
            let date_idx = find_column(&headers, date_column)?;
            let hour_idx = hour_columns
                .iter()
                .map(|h| find_column(&headers, h))
                .collect::<Result<Vec<_>>>()?;
            for record in reader.records() {
                let record = record?;
                let line = record_line(&record);
                let segment = record.get(seg_idx).unwrap_or_default().to_string();
                let date_text = record.get(date_idx).unwrap_or_default();
                let midnight = NaiveDate::parse_from_str(date_text, date_format)
                    .map_err(|e| parse_error(line, format!("date {date_text:?}: {e}")))?
                    .and_hms_opt(0, 0, 0)
                    .expect("midnight is valid")
                    .and_utc()
                    .timestamp();
                let samples = segments.entry(segment.clone()).or_default();
                if samples.contains_key(&midnight) {
                    return Err(Error::DuplicateTimestamp {
                        segment,
                        timestamp: date_text.to_string(),
                    });
                }
                for (h, &idx) in hour_idx.iter().enumerate() {
                    let value = parse_count(&record, idx, &hour_columns[h], line)?;
                    samples.insert(midnight + h as i64 * HOUR, value);
                }
            }
        }
        TrafficCsvSchema::Long {
            segment_column,
            timestamp_column,
            timestamp_format,
            value_column,
        } => {
            let seg_idx = find_column(&headers, segment_column)?;
            let ts_idx = find_column(&headers, timestamp_column)?;
            let val_idx = find_column(&headers, value_column)?;
            for record in reader.records() {
                let record = record?;
                let line = record_line(&record);
                let segment = record.get(seg_idx).unwrap_or_default().to_string();
                let ts_text = record.get(ts_idx).unwrap_or_default();
                let ts = parse_timestamp(ts_text, timestamp_format, line)?;
                let value = parse_count(&record, val_idx, value_column, line)?;
                match segments.entry(segment.clone()).or_default().entry(ts) {
                    Entry::Occupied(_) => {
                        return Err(Error::DuplicateTimestamp {
                            segment,
                            timestamp: ts_text.to_string(),
                        })
                    }
                    Entry::Vacant(slot) => {
                        slot.insert(value);
                    }
                }
            }
        }
    }

    segments
        .into_iter()
        .map(|(id, samples)| to_raw(id, samples))
        .collect()
}

pub(super) fn parse_timestamp(text: &str, format: &str, line: u64) -> Result<i64> {
    NaiveDateTime::parse_from_str(text, format)
        .map(|t| t.and_utc().timestamp())
        .map_err(|e| parse_error(line, format!("timestamp {text:?}: {e}")))
}

pub(super) fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_error(line: u64, message: String) -> Error {
    Error::Parse {
        what: "traffic csv",
        line: line as usize,
        message,
    }
}

fn parse_count(
    record: &csv::StringRecord,
    idx: usize,
    column: &str,
    line: u64,
) -> Result<Option<f64>> {
    let text = record.get(idx).unwrap_or_default();
    if text.is_empty() {
        return Ok(None);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::NonNumericCount {
            record: line,
            column: column.to_string(),
            value: text.to_string(),
        }),
    }
}

/// Lays sparse hourly samples onto a contiguous grid.
pub(super) fn to_raw(id: String, samples: BTreeMap<i64, Option<f64>>) -> Result<RawSeries> {
    let (&first, _) = samples
        .first_key_value()
        .ok_or_else(|| Error::InvalidSeries(format!("{id:?} has no rows")))?;
    let (&last, _) = samples.last_key_value().expect("non-empty");
    let len = ((last - first) / HOUR + 1) as usize;
    let mut values = vec![None; len];
    for (ts, v) in samples {
        if (ts - first) % HOUR != 0 {
            return Err(Error::InvalidSeries(format!(
                "{id:?} has an off-grid timestamp {ts}"
            )));
        }
        values[((ts - first) / HOUR) as usize] = v;
    }
    Ok(RawSeries::new(id, first, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide_schema() -> TrafficCsvSchema {
        TrafficCsvSchema::Wide24 {
            segment_column: "Segment ID".into(),
            date_column: "Date".into(),
            date_format: "%m/%d/%Y".into(),
            hour_columns: (0..24).map(|h| format!("h{h}")).collect(),
        }
    }

    fn wide_csv(rows: &[(&str, &str, f64)]) -> String {
        let mut s = String::from("Segment ID,Date");
        for h in 0..24 {
            s.push_str(&format!(",h{h}"));
        }
        s.push('\n');
        for (seg, date, base) in rows {
            s.push_str(&format!("{seg},{date}"));
            for h in 0..24 {
                s.push_str(&format!(",{}", base + h as f64));
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn two_days_make_48_hours() {
        let csv = wide_csv(&[("7", "09/13/2014", 100.0), ("7", "09/14/2014", 200.0)]);
        let series = load_traffic(csv.as_bytes(), &wide_schema()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].len(), 48);
        assert_eq!(series[0].values()[0], 100.0);
        assert_eq!(series[0].values()[23], 123.0);
        assert_eq!(series[0].values()[24], 200.0);
    }

    #[test]
    fn day_order_follows_dates_not_rows() {
        let csv = wide_csv(&[("7", "09/14/2014", 200.0), ("7", "09/13/2014", 100.0)]);
        let series = load_traffic(csv.as_bytes(), &wide_schema()).unwrap();
        assert_eq!(series[0].values()[0], 100.0);
    }

    #[test]
    fn duplicate_day_rejected() {
        let csv = wide_csv(&[("7", "09/13/2014", 1.0), ("7", "09/13/2014", 2.0)]);
        assert!(matches!(
            load_traffic(csv.as_bytes(), &wide_schema()),
            Err(Error::DuplicateTimestamp { .. })
        ));
    }

    #[test]
    fn non_numeric_count() {
        let csv = wide_csv(&[("7", "09/13/2014", 1.0)]).replace(",5,", ",five,");
        assert!(matches!(
            load_traffic(csv.as_bytes(), &wide_schema()),
            Err(Error::NonNumericCount { ref value, .. }) if value == "five"
        ));
    }

    #[test]
    fn missing_header_is_schema_mismatch() {
        let csv = "Segment,Date\n1,09/13/2014\n";
        assert!(matches!(
            load_traffic(csv.as_bytes(), &wide_schema()),
            Err(Error::SchemaMismatch(_))
        ));
        let bad = TrafficCsvSchema::Wide24 {
            segment_column: "s".into(),
            date_column: "d".into(),
            date_format: "%F".into(),
            hour_columns: vec!["a".into()],
        };
        assert!(matches!(bad.validate(), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn missing_day_leaves_gap() {
        let csv = wide_csv(&[("7", "09/13/2014", 1.0), ("7", "09/15/2014", 2.0)]);
        let raw = load_traffic_raw(csv.as_bytes(), &wide_schema()).unwrap();
        assert_eq!(raw[0].len(), 72);
        assert_eq!(raw[0].missing(), 24);
        assert!(matches!(
            load_traffic(csv.as_bytes(), &wide_schema()),
            Err(Error::MissingSamples { count: 24, .. })
        ));
    }

    #[test]
    fn long_format_three_segments_ten_days() {
        let mut csv = String::from("segment,time,volume\n");
        for seg in ["a", "b", "c"] {
            for k in 0..240 {
                let t = NaiveDate::from_ymd_opt(2014, 9, 13)
                    .unwrap()
                    .and_hms_opt(0, 0, 0)
                    .unwrap()
                    + chrono::Duration::hours(k);
                csv.push_str(&format!("{seg},{},{}\n", t.format("%Y-%m-%d %H:%M:%S"), k));
            }
        }
        let schema = TrafficCsvSchema::Long {
            segment_column: "segment".into(),
            timestamp_column: "time".into(),
            timestamp_format: "%Y-%m-%d %H:%M:%S".into(),
            value_column: "volume".into(),
        };
        let series = load_traffic(csv.as_bytes(), &schema).unwrap();
        assert_eq!(series.len(), 3);
        assert!(series.iter().all(|s| s.len() == 240));
        assert_eq!(series[1].id(), "b");
        assert_eq!(series[2].values()[239], 239.0);
    }

    #[test]
    fn long_format_duplicate_hour() {
        let csv = "segment,time,volume\na,2014-09-13 01:00:00,1\na,2014-09-13 01:00:00,2\n";
        let schema = TrafficCsvSchema::Long {
            segment_column: "segment".into(),
            timestamp_column: "time".into(),
            timestamp_format: "%Y-%m-%d %H:%M:%S".into(),
            value_column: "volume".into(),
        };
        assert!(matches!(
            load_traffic(csv.as_bytes(), &schema),
            Err(Error::DuplicateTimestamp { .. })
        ));
    }

    #[test]
    fn nyc_layout_names() {
        let cols = nyc_hour_columns();
        assert_eq!(cols.len(), 24);
        assert_eq!(cols[0], "12:00-1:00 AM");
        assert_eq!(cols[12], "12:00-1:00 PM");
        assert_eq!(cols[23], "11:00-12:00 PM");
        // header matching ignores internal whitespace, as in the NYC export
        let mut csv = String::from("Segment ID,Date");
        for c in &cols {
            csv.push(',');
            csv.push_str(&c.replace(' ', ""));
        }
        csv.push_str("\n9,01/02/2016");
        for h in 0..24 {
            csv.push_str(&format!(",{h}"));
        }
        csv.push('\n');
        let series = load_traffic(csv.as_bytes(), &TrafficCsvSchema::nyc_wide()).unwrap();
        assert_eq!(series[0].len(), 24);
    }
}
