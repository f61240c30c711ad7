use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use arxflow_core::clustering::{select_k, DtwConfig, KMeansOptions, KSelection};
use arxflow_core::ingest::{read_cache, write_cache};
use arxflow_core::{MultiSeriesDataset, TimeSeries};

use crate::CliError;

pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const CH_FILE: &str = "ch.csv";
pub const CENTROIDS_FILE: &str = "centroids.cache";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Cluster the series as stored.
    Full,
    /// Cluster each series' mean 24-hour profile.
    Daily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub window: Option<usize>,
    pub profile: Profile,
    pub kmeans: KMeansOptions,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k_min: 2,
            k_max: 6,
            window: None,
            profile: Profile::Full,
            kmeans: KMeansOptions::default(),
            seed: 0,
        }
    }
}

/// Mean value per hour of day, indexed by the clock hour of `t0 + k·dt`.
pub fn daily_profile(series: &TimeSeries) -> Result<TimeSeries, CliError> {
    if series.dt() != 1.0 || series.len() < 24 {
        return Err(CliError::Config(format!(
            "daily profiles need at least 24 hourly samples; {:?} has {} at dt = {}",
            series.id(),
            series.len(),
            series.dt()
        )));
    }
    let mut sum = [0.0; 24];
    let mut count = [0usize; 24];
    for (k, v) in series.values().iter().enumerate() {
        let hour = series.time_at(k).div_euclid(3600).rem_euclid(24) as usize;
        sum[hour] += v;
        count[hour] += 1;
    }
    let mean = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    Ok(TimeSeries::hourly(series.id(), mean)?)
}

/// Clusters every series of `data` for each `k` in range.
pub fn cluster_dataset(
    data: &MultiSeriesDataset,
    opts: &ClusterOptions,
) -> Result<(Vec<TimeSeries>, KSelection), CliError> {
    let series: Vec<TimeSeries> = match opts.profile {
        Profile::Full => data.all_series().cloned().collect(),
        Profile::Daily => data
            .all_series()
            .map(daily_profile)
            .collect::<Result<_, _>>()?,
    };
    let cfg = DtwConfig {
        window: opts.window,
        ..Default::default()
    };
    let selection = select_k(
        &series,
        opts.k_min..=opts.k_max,
        &cfg,
        &opts.kmeans,
        opts.seed,
    )?;
    Ok((series, selection))
}

/// Writes `assignments.csv`, `ch.csv` and `centroids.cache` into `out_dir`.
pub fn cmd_cluster(
    cache: &Path,
    opts: &ClusterOptions,
    out_dir: &Path,
) -> Result<KSelection, CliError> {
    let bytes = fs::read(cache).map_err(|e| CliError::io(cache, e))?;
    let data = read_cache(&bytes)
        .map_err(|e| CliError::Context(cache.display().to_string(), Box::new(e.into())))?;
    let (series, selection) = cluster_dataset(&data, opts)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let mut assignments = String::from("series_id,cluster\n");
    for (s, c) in series.iter().zip(&selection.best.assignments) {
        writeln!(assignments, "{},{c}", s.id()).unwrap();
    }
    let mut ch = String::from("k,ch_score\n");
    for (k, score) in &selection.curve {
        writeln!(ch, "{k},{score}").unwrap();
    }
    let mut centroids = selection.best.centroid_series(&series[0])?;
    let first = centroids.remove(0);
    let mut cache_bytes = Vec::new();
    write_cache(
        &MultiSeriesDataset::new(first, centroids)?,
        &mut cache_bytes,
    )?;

    for (name, content) in [
        (ASSIGNMENTS_FILE, assignments.into_bytes()),
        (CH_FILE, ch.into_bytes()),
        (CENTROIDS_FILE, cache_bytes),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(selection)
}
