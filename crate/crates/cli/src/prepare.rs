use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use arxflow_core::ingest::{
    align_with_report, load_traffic_raw, load_weather_column, weather_description_series,
    weather_numeric_series, write_cache, AlignPolicy, RawSeries, TrafficCsvSchema,
    WeatherEncodingMap,
};
use arxflow_core::MultiSeriesDataset;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct PrepareOptions {
    pub traffic: Vec<PathBuf>,
    pub schema: TrafficCsvSchema,
    /// Output segment; the first segment read when absent.
    pub segment: Option<String>,
    /// Segments used as exogenous channels. When no output segment is named
    /// and this is empty, every other segment is included.
    pub neighbors: Vec<String>,
    /// `(channel name, file)` pairs of numeric weather tables.
    pub weather_numeric: Vec<(String, PathBuf)>,
    pub weather_description: Option<PathBuf>,
    /// Column of the weather tables to read.
    pub city: String,
    pub weather_timestamp_format: String,
    /// Evaluator maps for descriptions; the bundled map when empty.
    pub weather_maps: Vec<PathBuf>,
    pub max_gap: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            traffic: Vec::new(),
            schema: TrafficCsvSchema::nyc_wide(),
            segment: None,
            neighbors: Vec::new(),
            weather_numeric: Vec::new(),
            weather_description: None,
            city: "New York".into(),
            weather_timestamp_format: "%Y-%m-%d %H:%M:%S".into(),
            weather_maps: Vec::new(),
            max_gap: AlignPolicy::default().max_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareSummary {
    pub series: Vec<String>,
    pub t0: i64,
    pub len: usize,
    pub filled: Vec<usize>,
}

impl fmt::Display for PrepareSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let start = chrono::DateTime::from_timestamp(self.t0, 0)
            .map_or(self.t0.to_string(), |d| d.to_string());
        writeln!(f, "series: {}", self.series.join(", "))?;
        writeln!(f, "window: {start}, {} hours", self.len)?;
        let fills: Vec<String> = self
            .series
            .iter()
            .zip(&self.filled)
            .map(|(s, n)| format!("{s}={n}"))
            .collect();
        writeln!(f, "gap fills: {}", fills.join(" "))?;
        write!(
            f,
            "channels: 1 output + {} exogenous",
            self.series.len() - 1
        )
    }
}

fn with_file<T>(path: &Path, r: arxflow_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Context(path.display().to_string(), Box::new(e.into())))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Aligned dataset from raw traffic and weather files.
pub fn prepare_dataset(
    opts: &PrepareOptions,
) -> Result<(MultiSeriesDataset, PrepareSummary), CliError> {
    if opts.traffic.is_empty() {
        return Err(CliError::Config(
            "at least one traffic file is required".into(),
        ));
    }
    let mut segments: Vec<RawSeries> = Vec::new();
    for path in &opts.traffic {
        for s in with_file(path, load_traffic_raw(&read(path)?, &opts.schema))? {
            if segments.iter().any(|o| o.id == s.id) {
                return Err(CliError::Config(format!(
                    "segment {:?} appears in more than one file",
                    s.id
                )));
            }
            segments.push(s);
        }
    }
    let take = |segments: &mut Vec<RawSeries>, id: &str| -> Result<RawSeries, CliError> {
        let i = segments
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| CliError::Config(format!("no segment {id:?} in the traffic files")))?;
        Ok(segments.remove(i))
    };
    let output = match &opts.segment {
        Some(id) => take(&mut segments, id)?,
        None if segments.is_empty() => {
            return Err(CliError::Config("traffic files hold no segments".into()))
        }
        None => segments.remove(0),
    };
    let mut channels = if opts.segment.is_none() && opts.neighbors.is_empty() {
        segments
    } else {
        opts.neighbors
            .iter()
            .map(|id| take(&mut segments, id))
            .collect::<Result<Vec<_>, _>>()?
    };

    for (name, path) in &opts.weather_numeric {
        let rows = with_file(
            path,
            load_weather_column(
                &read(path)?,
                "datetime",
                &opts.weather_timestamp_format,
                &opts.city,
            ),
        )?;
        channels.push(with_file(path, weather_numeric_series(name, &rows))?);
    }
    if let Some(path) = &opts.weather_description {
        let maps = if opts.weather_maps.is_empty() {
            vec![WeatherEncodingMap::default_map()]
        } else {
            opts.weather_maps
                .iter()
                .map(|p| {
                    let name = p
                        .file_stem()
                        .map_or_else(|| "map".into(), |s| s.to_string_lossy().into_owned());
                    with_file(p, WeatherEncodingMap::from_csv(name, &read(p)?))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let rows = with_file(
            path,
            load_weather_column(
                &read(path)?,
                "datetime",
                &opts.weather_timestamp_format,
                &opts.city,
            ),
        )?;
        channels.push(with_file(
            path,
            weather_description_series("weather", &rows, &maps),
        )?);
    }

    let (data, report) = align_with_report(
        &output,
        &channels,
        AlignPolicy {
            max_gap: opts.max_gap,
        },
    )?;
    let summary = PrepareSummary {
        series: data.all_series().map(|s| s.id().to_string()).collect(),
        t0: report.t0,
        len: report.len,
        filled: report.filled,
    };
    Ok((data, summary))
}

/// Writes the dataset cache to `out` and returns the summary.
pub fn cmd_prepare(opts: &PrepareOptions, out: &Path) -> Result<PrepareSummary, CliError> {
    let (data, summary) = prepare_dataset(opts)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut buf = Vec::new();
    write_cache(&data, &mut buf)?;
    fs::write(out, buf).map_err(|e| CliError::io(out, e))?;
    Ok(summary)
}
