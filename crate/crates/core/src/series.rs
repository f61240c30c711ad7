//! Uniformly sampled series and aligned multi-channel datasets.

use crate::error::{Error, Result};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// A uniformly sampled scalar series.
///
/// Timestamps are implied: sample `k` is taken at `t0 + k * dt`, with `t0` in
/// seconds since the Unix epoch (naive local clock) and `dt` in hours.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    t0: i64,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, t0: i64, dt: f64, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::InvalidSeries(format!("{id:?} has no samples")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "{id:?} has sampling period {dt}"
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "{id:?} has non-finite sample {} at index {k}",
                values[k]
            )));
        }
        Ok(TimeSeries { id, t0, dt, values })
    }

    /// Hourly series starting at the epoch; handy for synthetic data.
    pub fn hourly(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(id, 0, 1.0, values)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Timestamp (epoch seconds) of sample `k`.
    pub fn time_at(&self, k: usize) -> i64 {
        self.t0 + (k as f64 * self.dt * SECONDS_PER_HOUR).round() as i64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid and id, new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.id.clone(), self.t0, self.dt, values)
    }

    pub fn renamed(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// The output series to be predicted together with its exogenous channels,
/// all on one sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeriesDataset {
    output: TimeSeries,
    exogenous: Vec<TimeSeries>,
}

impl MultiSeriesDataset {
    pub fn new(output: TimeSeries, exogenous: Vec<TimeSeries>) -> Result<Self> {
        for ch in &exogenous {
            if ch.len() != output.len() {
                return Err(Error::LengthMismatch {
                    expected: output.len(),
                    found: ch.len(),
                });
            }
            if ch.t0 != output.t0 || ch.dt != output.dt {
                return Err(Error::InvalidSeries(format!(
                    "channel {:?} is not on the grid of {:?}",
                    ch.id, output.id
                )));
            }
        }
        Ok(MultiSeriesDataset { output, exogenous })
    }

    /// Pure auto-regressive dataset.
    pub fn autoregressive(output: TimeSeries) -> Self {
        MultiSeriesDataset {
            output,
            exogenous: Vec::new(),
        }
    }

    pub fn output(&self) -> &TimeSeries {
        &self.output
    }

    pub fn exogenous(&self) -> &[TimeSeries] {
        &self.exogenous
    }

    pub fn len(&self) -> usize {
        self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel_count(&self) -> usize {
        self.exogenous.len()
    }

    /// Output first, then the exogenous channels in order.
    pub fn all_series(&self) -> impl Iterator<Item = &TimeSeries> {
        std::iter::once(&self.output).chain(self.exogenous.iter())
    }

    /// Drops every exogenous channel.
    pub fn without_exogenous(&self) -> Self {
        Self::autoregressive(self.output.clone())
    }

    pub fn into_parts(self) -> (TimeSeries, Vec<TimeSeries>) {
        (self.output, self.exogenous)
    }
}
