use std::path::PathBuf;
use std::process::ExitCode;

use arxflow_cli::cluster::{ClusterOptions, Profile};
use arxflow_cli::prepare::PrepareOptions;
use arxflow_cli::{cmd_cluster, cmd_inspect, cmd_prepare, cmd_run, CliError, ExperimentConfig};
use arxflow_core::clustering::KMeansOptions;
use arxflow_core::ingest::TrafficCsvSchema;
use clap::{Parser, Subcommand, ValueEnum};

/// ARX system identification for hourly traffic series.
#[derive(Debug, Parser)]
#[command(name = "arxflow", version)]
struct Cli {
    /// Base seed; overrides the config file's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Matrix rows run concurrently; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output root.
    #[arg(
        long,
        global = true,
        env = "ARXFLOW_OUT",
        default_value = "arxflow-out"
    )]
    out: PathBuf,
    /// Experiment config for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Schema {
    /// `Segment ID`, `Date` and 24 hour columns.
    Nyc,
    /// `segment,timestamp,count` with `%Y-%m-%d %H:%M:%S` timestamps.
    Long,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Full,
    Daily,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align traffic and weather files into a dataset cache.
    Prepare {
        #[arg(long, required = true, num_args = 1..)]
        traffic: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "nyc")]
        schema: Schema,
        /// Output segment id (default: the first one read).
        #[arg(long)]
        segment: Option<String>,
        /// Segment used as an exogenous channel; repeatable.
        #[arg(long)]
        neighbor: Vec<String>,
        /// Numeric weather table as NAME=PATH; repeatable.
        #[arg(long, value_parser = parse_named_path)]
        weather: Vec<(String, PathBuf)>,
        /// Weather description table, encoded through the evaluator maps.
        #[arg(long)]
        weather_description: Option<PathBuf>,
        /// `description,score` evaluator map; repeatable.
        #[arg(long)]
        weather_map: Vec<PathBuf>,
        #[arg(long, default_value = "New York")]
        city: String,
        /// Longest interpolated gap in hours.
        #[arg(long, default_value_t = 3)]
        max_gap: usize,
        /// Cache file name under the output root.
        #[arg(long, default_value = "dataset")]
        name: String,
    },
    /// DTW k-means over the series of a dataset cache.
    Cluster {
        cache: PathBuf,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        /// Sakoe-Chiba band radius.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, value_enum, default_value = "full")]
        profile: ProfileArg,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Run an experiment matrix.
    Run {
        /// Config file (alternative to --config).
        file: Option<PathBuf>,
    },
    /// Summarise a dataset cache or model file.
    Inspect { path: PathBuf },
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare {
            traffic,
            schema,
            segment,
            neighbor,
            weather,
            weather_description,
            weather_map,
            city,
            max_gap,
            name,
        } => {
            let schema = match schema {
                Schema::Nyc => TrafficCsvSchema::nyc_wide(),
                Schema::Long => TrafficCsvSchema::Long {
                    segment_column: "segment".into(),
                    timestamp_column: "timestamp".into(),
                    timestamp_format: "%Y-%m-%d %H:%M:%S".into(),
                    value_column: "count".into(),
                },
            };
            let opts = PrepareOptions {
                traffic,
                schema,
                segment,
                neighbors: neighbor,
                weather_numeric: weather,
                weather_description,
                city,
                weather_maps: weather_map,
                max_gap,
                ..PrepareOptions::default()
            };
            let path = cli.out.join(format!("{name}.cache"));
            let summary = cmd_prepare(&opts, &path)?;
            println!("{summary}");
            println!("cache: {}", path.display());
        }
        Command::Cluster {
            cache,
            k_min,
            k_max,
            window,
            profile,
            restarts,
            max_iter,
        } => {
            let opts = ClusterOptions {
                k_min,
                k_max,
                window,
                profile: match profile {
                    ProfileArg::Full => Profile::Full,
                    ProfileArg::Daily => Profile::Daily,
                },
                kmeans: KMeansOptions {
                    restarts,
                    max_iter,
                    ..KMeansOptions::default()
                },
                seed: cli.seed.unwrap_or(0),
            };
            let stem = cache
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
            let dir = cli.out.join(format!("cluster_{stem}"));
            let selection = cmd_cluster(&cache, &opts, &dir)?;
            for (k, ch) in &selection.curve {
                println!("k = {k}: CH = {ch:.4}");
            }
            println!(
                "selected k = {} (sizes {:?})",
                selection.best.k,
                selection.best.cluster_sizes()
            );
            println!("output: {}", dir.display());
        }
        Command::Run { file } => {
            let path = file
                .or(cli.config)
                .ok_or_else(|| CliError::Config("run needs a config file".into()))?;
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let dir = cli.out.join(cfg.name.as_deref().unwrap_or("run"));
            let outcome = cmd_run(&cfg, &dir, cli.jobs)?;
            for (i, r) in outcome.rows.iter().enumerate() {
                if let Err(e) = &r.result {
                    eprintln!("{}", e.line_in(&format!("row {} {:?}", i + 1, r.row.label)));
                }
            }
            println!("report: {}", outcome.report_path.display());
            let failed = outcome.failures();
            if failed > 0 {
                return Err(CliError::RowsFailed {
                    failed,
                    total: outcome.rows.len(),
                });
            }
        }
        Command::Inspect { path } => print!("{}", cmd_inspect(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
