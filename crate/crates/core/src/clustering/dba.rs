use super::dtw::{dtw_path, dtw_values, DtwConfig};
use crate::error::{Error, Result};

/// Index of the series minimising the summed DTW cost to all others;
/// ties go to the lowest index.
pub fn medoid(series: &[&[f64]], cfg: &DtwConfig) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = series.len();
    let mut totals = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dtw_values(series[i], series[j], cfg)?;
            totals[i] += d;
            totals[j] += d;
        }
    }
    Ok(argmin(&totals))
}

pub(super) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// DTW barycenter averaging: repeatedly aligns every series to the current
/// average and replaces each average sample by the mean of the samples
/// warped onto it. The result keeps the length of `init`.
pub fn dba(
    series: &[&[f64]],
    init: &[f64],
    iterations: usize,
    cfg: &DtwConfig,
) -> Result<Vec<f64>> {
    if series.is_empty() || init.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut average = init.to_vec();
    let mut sums = vec![0.0; average.len()];
    let mut counts = vec![0usize; average.len()];
    for _ in 0..iterations {
        sums.fill(0.0);
        counts.fill(0);
        for s in series {
            let (_, path) = dtw_path(&average, s, cfg)?;
            for (i, j) in path {
                sums[i] += s[j];
                counts[i] += 1;
            }
        }
        let next: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        if next == average {
            break;
        }
        average = next;
    }
    Ok(average)
}
