use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use super::align::RawSeries;
use super::find_column;
use super::traffic::{parse_timestamp, record_line, to_raw};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

const DEFAULT_MAP: &str = include_str!("../../data/weather_default.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherScore {
    /// Ease of driving, 1 = unimpeded.
    pub score: f64,
    pub note: String,
}

/// One evaluator's mapping from weather description to an ease-of-driving
/// score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherEncodingMap {
    name: String,
    entries: BTreeMap<String, WeatherScore>,
}

/// Lower-cases, trims and collapses internal runs of whitespace.
pub fn normalize_description(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl WeatherEncodingMap {
    pub fn new(name: impl Into<String>) -> Self {
        WeatherEncodingMap {
            name: name.into(),
            entries: BTreeMap::new(),
        }
    }

    /// The bundled map. It is configuration, not measured ground truth.
    pub fn default_map() -> Self {
        Self::from_csv("default-v1", DEFAULT_MAP.as_bytes()).expect("bundled weather map is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn insert(&mut self, description: &str, score: f64, note: impl Into<String>) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!(
                "weather score {score} for {description:?} outside [0, 1]"
            )));
        }
        self.entries.insert(
            normalize_description(description),
            WeatherScore {
                score,
                note: note.into(),
            },
        );
        Ok(())
    }

    pub fn get(&self, description: &str) -> Option<&WeatherScore> {
        self.entries.get(&normalize_description(description))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a `description,score` CSV. An optional third `note` column is
    /// kept as the entry's source note; otherwise the map name is used.
    pub fn from_csv(name: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        let mut map = Self::new(name);
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(bytes);
        let headers = reader.headers()?.clone();
        let desc_idx = find_column(&headers, "description")?;
        let score_idx = find_column(&headers, "score")?;
        let note_idx = find_column(&headers, "note").ok();
        for record in reader.records() {
            let record = record?;
            let line = record_line(&record) as usize;
            let desc = record.get(desc_idx).unwrap_or_default();
            let score_text = record.get(score_idx).unwrap_or_default();
            let score: f64 = score_text.parse().map_err(|_| Error::Parse {
                what: "weather map",
                line,
                message: format!("score {score_text:?} is not a number"),
            })?;
            let note = note_idx
                .and_then(|i| record.get(i))
                .filter(|n| !n.is_empty())
                .map_or_else(|| map.name.clone(), str::to_string);
            if map.get(desc).is_some() {
                return Err(Error::Parse {
                    what: "weather map",
                    line,
                    message: format!("duplicate description {desc:?}"),
                });
            }
            map.insert(desc, score, note)?;
        }
        Ok(map)
    }
}

/// Mean score across evaluator maps for each description.
pub fn encode_descriptions<S: AsRef<str>>(
    descriptions: &[S],
    maps: &[WeatherEncodingMap],
) -> Result<Vec<f64>> {
    if maps.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one weather map is required".into(),
        ));
    }
    let mut scores = Vec::with_capacity(maps.len());
    descriptions
        .iter()
        .map(|d| {
            let d = d.as_ref();
            scores.clear();
            for map in maps {
                let entry = map
                    .get(d)
                    .ok_or_else(|| Error::UnknownDescription(d.to_string()))?;
                scores.push(entry.score);
            }
            // sorted, and taken as an offset from the minimum: the mean is then
            // independent of map order and exact when all evaluators agree
            scores.sort_by(f64::total_cmp);
            let low = scores[0];
            Ok(low + scores.iter().map(|s| s - low).sum::<f64>() / scores.len() as f64)
        })
        .collect()
}

/// Encodes a description sequence into a series on the given grid.
pub fn encode_weather<S: AsRef<str>>(
    id: impl Into<String>,
    t0: i64,
    dt: f64,
    descriptions: &[S],
    maps: &[WeatherEncodingMap],
) -> Result<TimeSeries> {
    TimeSeries::new(id, t0, dt, encode_descriptions(descriptions, maps)?)
}

/// Reads one column of a wide weather table (`datetime,<city>,<city>,...`),
/// returning `(epoch seconds, cell)` pairs; empty cells become `None`.
pub fn load_weather_column(
    csv_bytes: &[u8],
    timestamp_column: &str,
    timestamp_format: &str,
    value_column: &str,
) -> Result<Vec<(i64, Option<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_bytes);
    let headers = reader.headers()?.clone();
    let ts_idx = find_column(&headers, timestamp_column)?;
    let val_idx = find_column(&headers, value_column)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let ts = parse_timestamp(
            record.get(ts_idx).unwrap_or_default(),
            timestamp_format,
            line,
        )?;
        let cell = record.get(val_idx).unwrap_or_default();
        out.push((ts, (!cell.is_empty()).then(|| cell.to_string())));
    }
    Ok(out)
}

fn collect_hourly(
    id: &str,
    rows: impl Iterator<Item = Result<(i64, Option<f64>)>>,
) -> Result<RawSeries> {
    let mut samples = BTreeMap::new();
    for row in rows {
        let (ts, v) = row?;
        match samples.entry(ts) {
            Entry::Occupied(_) => {
                return Err(Error::DuplicateTimestamp {
                    segment: id.to_string(),
                    timestamp: ts.to_string(),
                })
            }
            Entry::Vacant(slot) => {
                slot.insert(v);
            }
        }
    }
    to_raw(id.to_string(), samples)
}

/// Numeric weather channel (humidity, pressure, temperature).
pub fn weather_numeric_series(id: &str, rows: &[(i64, Option<String>)]) -> Result<RawSeries> {
    collect_hourly(
        id,
        rows.iter().map(|(ts, cell)| {
            let v = match cell {
                None => None,
                Some(text) => match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => {
                        return Err(Error::NonNumericCount {
                            record: 0,
                            column: id.to_string(),
                            value: text.clone(),
                        })
                    }
                },
            };
            Ok((*ts, v))
        }),
    )
}

/// Qualitative weather channel encoded through the evaluator maps.
pub fn weather_description_series(
    id: &str,
    rows: &[(i64, Option<String>)],
    maps: &[WeatherEncodingMap],
) -> Result<RawSeries> {
    collect_hourly(
        id,
        rows.iter().map(|(ts, cell)| {
            let v = match cell {
                None => None,
                Some(text) => Some(encode_descriptions(&[text], maps)?[0]),
            };
            Ok((*ts, v))
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(name: &str, entries: &[(&str, f64)]) -> WeatherEncodingMap {
        let mut m = WeatherEncodingMap::new(name);
        for (d, s) in entries {
            m.insert(d, *s, name).unwrap();
        }
        m
    }

    #[test]
    fn mean_of_two_evaluators() {
        let a = map("a", &[("sky is clear", 1.0)]);
        let b = map("b", &[("sky is clear", 0.9)]);
        let out = encode_descriptions(&["sky is clear"], &[a, b]).unwrap();
        assert!((out[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn unknown_description_names_the_key() {
        let a = map("a", &[("sky is clear", 1.0)]);
        match encode_descriptions(&["heavy snow"], &[a]) {
            Err(Error::UnknownDescription(d)) => assert_eq!(d, "heavy snow"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_maps_reproduce_scores() {
        let a = map("a", &[("fog", 0.37), ("mist", 0.81)]);
        let out =
            encode_descriptions(&["fog", "mist"], &[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(out, vec![0.37, 0.81]);
    }

    #[test]
    fn lookup_ignores_case_and_whitespace() {
        let a = map("a", &[("Sky is Clear", 1.0)]);
        assert_eq!(a.get("  sky  IS clear ").unwrap().score, 1.0);
    }

    #[test]
    fn permutation_invariance() {
        let maps = [
            map("a", &[("x", 0.1)]),
            map("b", &[("x", 0.7)]),
            map("c", &[("x", 0.2)]),
            map("d", &[("x", 0.33)]),
        ];
        let want = encode_descriptions(&["x"], &maps).unwrap();
        let orders = [[3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]];
        for order in orders {
            let permuted: Vec<_> = order.iter().map(|&i| maps[i].clone()).collect();
            assert_eq!(encode_descriptions(&["x"], &permuted).unwrap(), want);
        }
    }

    #[test]
    fn scores_must_be_unit_interval() {
        assert!(WeatherEncodingMap::new("a").insert("x", 1.5, "").is_err());
        let csv = "description,score\nfoo,2.0\n";
        assert!(WeatherEncodingMap::from_csv("a", csv.as_bytes()).is_err());
    }

    #[test]
    fn csv_map_and_default() {
        let csv = "description,score\nSky is clear,1.0\nheavy snow,0.1\n";
        let m = WeatherEncodingMap::from_csv("eval1", csv.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.get("heavy snow").unwrap().note, "eval1");
        let d = WeatherEncodingMap::default_map();
        assert_eq!(d.get("sky is clear").unwrap().score, 1.0);
        assert_eq!(d.get("heavy snow").unwrap().score, 0.1);
    }

    #[test]
    fn weather_columns() {
        let csv = "datetime,New York,Boston\n\
                   2012-10-01 12:00:00,mist,sky is clear\n\
                   2012-10-01 13:00:00,,sky is clear\n\
                   2012-10-01 14:00:00,fog,sky is clear\n";
        let rows = load_weather_column(csv.as_bytes(), "datetime", "%Y-%m-%d %H:%M:%S", "New York")
            .unwrap();
        let series =
            weather_description_series("desc", &rows, &[WeatherEncodingMap::default_map()])
                .unwrap();
        assert_eq!(series.values, vec![Some(0.8), None, Some(0.5)]);
        let numeric = "datetime,New York\n2012-10-01 12:00:00,288.2\n2012-10-01 13:00:00,x\n";
        let rows = load_weather_column(
            numeric.as_bytes(),
            "datetime",
            "%Y-%m-%d %H:%M:%S",
            "New York",
        )
        .unwrap();
        assert!(matches!(
            weather_numeric_series("t", &rows),
            Err(Error::NonNumericCount { .. })
        ));
    }
}
