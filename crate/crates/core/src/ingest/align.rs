use crate::error::{Error, Result};
use crate::series::{MultiSeriesDataset, TimeSeries};

const HOUR: i64 = 3600;

/// An hourly series that may have missing samples, as read from raw files.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub id: String,
    /// Epoch seconds of the first slot.
    pub t0: i64,
    pub values: Vec<Option<f64>>,
}

impl RawSeries {
    pub fn new(id: impl Into<String>, t0: i64, values: Vec<Option<f64>>) -> Self {
        RawSeries {
            id: id.into(),
            t0,
            values,
        }
    }

    /// Requires an hourly series.
    pub fn from_series(series: &TimeSeries) -> Result<Self> {
        if series.dt() != 1.0 {
            return Err(Error::InvalidSeries(format!(
                "{:?} has dt = {} h; alignment needs hourly data",
                series.id(),
                series.dt()
            )));
        }
        Ok(RawSeries::new(
            series.id(),
            series.t0(),
            series.values().iter().copied().map(Some).collect(),
        ))
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fails with `MissingSamples` if any slot is empty.
    pub fn into_series(self) -> Result<TimeSeries> {
        let missing = self.missing();
        if missing > 0 {
            return Err(Error::MissingSamples {
                series: self.id,
                count: missing,
            });
        }
        let values = self
            .values
            .into_iter()
            .map(|v| v.unwrap_or_default())
            .collect();
        TimeSeries::new(self.id, self.t0, 1.0, values)
    }

    /// Epoch-second bounds `[first, last]` of observed samples.
    fn observed_span(&self) -> Option<(i64, i64)> {
        let first = self.values.iter().position(Option::is_some)?;
        let last = self.values.iter().rposition(Option::is_some)?;
        Some((self.t0 + first as i64 * HOUR, self.t0 + last as i64 * HOUR))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignPolicy {
    /// Longest run of missing samples filled by linear interpolation.
    pub max_gap: usize,
}

impl Default for AlignPolicy {
    fn default() -> Self {
        AlignPolicy { max_gap: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignReport {
    pub t0: i64,
    pub len: usize,
    /// Interpolated samples per series, output first.
    pub filled: Vec<usize>,
}

/// Trims every series to the common observed window and interpolates short
/// interior gaps.
pub fn align(
    output: &RawSeries,
    channels: &[RawSeries],
    policy: AlignPolicy,
) -> Result<MultiSeriesDataset> {
    align_with_report(output, channels, policy).map(|(d, _)| d)
}

pub fn align_with_report(
    output: &RawSeries,
    channels: &[RawSeries],
    policy: AlignPolicy,
) -> Result<(MultiSeriesDataset, AlignReport)> {
    let all: Vec<&RawSeries> = std::iter::once(output).chain(channels).collect();
    let mut start = i64::MIN;
    let mut end = i64::MAX;
    for s in &all {
        if s.t0 % HOUR != output.t0 % HOUR {
            return Err(Error::InvalidSeries(format!(
                "{:?} is not on the hourly grid of {:?}",
                s.id, output.id
            )));
        }
        let (a, b) = s.observed_span().ok_or(Error::NoOverlap)?;
        start = start.max(a);
        end = end.min(b);
    }
    if start > end {
        return Err(Error::NoOverlap);
    }
    let len = ((end - start) / HOUR + 1) as usize;

    let mut filled = Vec::with_capacity(all.len());
    let mut series = Vec::with_capacity(all.len());
    for s in &all {
        let offset = ((start - s.t0) / HOUR) as usize;
        let window = &s.values[offset..offset + len];
        let (values, n) = interpolate(&s.id, window, policy.max_gap)?;
        filled.push(n);
        series.push(TimeSeries::new(s.id.clone(), start, 1.0, values)?);
    }
    let output = series.remove(0);
    let dataset = MultiSeriesDataset::new(output, series)?;
    Ok((
        dataset,
        AlignReport {
            t0: start,
            len,
            filled,
        },
    ))
}

/// Both ends of `window` are observed by construction.
fn interpolate(id: &str, window: &[Option<f64>], max_gap: usize) -> Result<(Vec<f64>, usize)> {
    let mut out = Vec::with_capacity(window.len());
    let mut filled = 0;
    let mut i = 0;
    while i < window.len() {
        match window[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let gap_end = (i..window.len())
                    .find(|&j| window[j].is_some())
                    .unwrap_or(window.len());
                let length = gap_end - i;
                if length > max_gap || i == 0 || gap_end == window.len() {
                    return Err(Error::GapTooLarge {
                        series: id.to_string(),
                        position: i,
                        length,
                    });
                }
                let left = out[i - 1];
                let right = window[gap_end].unwrap_or_default();
                let span = (length + 1) as f64;
                for k in 1..=length {
                    out.push(left + (right - left) * k as f64 / span);
                }
                filled += length;
                i = gap_end;
            }
        }
    }
    Ok((out, filled))
}
