//! Experiment matrices: one report row per configured label.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use arxflow_core::eval::{
    aggregate, evaluate, write_plot_csv, Evaluation, EvaluationReport, REPORT_HEADER,
};
use arxflow_core::features::{lag_embed, poly_expand, LagSpec, PolySpec};
use arxflow_core::ingest::{read_cache, synth_arx, SynthArx};
use arxflow_core::linreg::{fit_pipeline, CvSpec, PipelineOptions};
use arxflow_core::neural::{
    adam_train, lm_train, AdamConfig, IoLayout, LmConfig, LstmModel, SrnnModel,
};
use arxflow_core::rng::derive_seed;
use arxflow_core::{make_split, MultiSeriesDataset, RowLabel};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Family, Row, RowKind};
use crate::CliError;

pub const REPORT_FILE: &str = "report.csv";

#[derive(Debug)]
pub struct RowOutcome {
    pub row: Row,
    pub result: Result<EvaluationReport, CliError>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report_path: PathBuf,
    pub rows: Vec<RowOutcome>,
}

impl RunOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Named datasets the matrix is evaluated on.
pub fn load_datasets(
    cfg: &ExperimentConfig,
) -> Result<Vec<(String, MultiSeriesDataset)>, CliError> {
    if let Some(s) = &cfg.dataset.synthetic {
        let base = s.seed.unwrap_or(cfg.seed);
        return (0..s.series)
            .map(|k| {
                let spec = SynthArx::new(
                    s.coeffs_u.clone(),
                    s.coeffs_p.clone(),
                    s.length,
                    derive_seed(base, k as u64),
                )
                .noise(s.noise_sd);
                Ok((format!("synthetic{k}"), synth_arx(&spec)?))
            })
            .collect();
    }
    cfg.dataset
        .caches
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            let data = read_cache(&bytes)
                .map_err(|e| CliError::Context(p.display().to_string(), Box::new(e.into())))?;
            let id = p
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
            Ok((id, data))
        })
        .collect()
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn host() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{} ({threads} threads)",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

struct SeriesRun {
    eval: Evaluation,
    meta: Vec<(String, String)>,
}

fn run_series(
    cfg: &ExperimentConfig,
    row: &Row,
    data: &MultiSeriesDataset,
    seed: u64,
    dir: &Path,
    tag: &str,
) -> Result<SeriesRun, CliError> {
    let data = if row.exogenous {
        if data.channel_count() == 0 {
            return Err(CliError::Config(format!(
                "{:?} needs at least one exogenous channel",
                row.label
            )));
        }
        data.clone()
    } else {
        data.without_exogenous()
    };
    let mut meta = vec![("split_seed".to_string(), seed.to_string())];
    let timing = |start: Instant| cfg.timing.then(|| start.elapsed().as_secs_f64());
    let mut lags = LagSpec::uniform(cfg.lags.td);
    lags.include_current_p = cfg.lags.include_current_p;

    let eval = match row.kind {
        RowKind::Linear { method, lambda, cv } => {
            let poly = if cfg.matrix.family == Family::Poly {
                PolySpec::quadratic()
            } else {
                PolySpec::linear()
            };
            let problem = poly_expand(&lag_embed(&data, &lags)?, &poly)?;
            let split = make_split(problem.n_rows(), &cfg.split.spec(row.validation, seed)?)?;
            let mut opts =
                PipelineOptions::new(method, lambda).keep(cfg.linear.lars_keep.lars_keep());
            opts.lasso = cfg.linear.lasso_options();
            if cv {
                opts = opts.with_cv(CvSpec {
                    grid: None,
                    one_se: cfg.linear.one_se,
                });
            }
            let start = Instant::now();
            let (model, cv_report) = fit_pipeline(&problem, &split, &opts)?;
            let secs = timing(start);
            model.write_text(create(&dir.join(format!("model_{tag}.txt")))?)?;
            meta.push(("lambda".into(), format!("{:?}", model.lambda)));
            meta.push(("selected".into(), model.selected.join(" ")));
            if let Some(r) = cv_report {
                meta.push(("cv_folds".into(), r.folds.to_string()));
            }
            evaluate(&model, &data, &split, &row.label, secs)?
        }
        RowKind::Neural { td } => {
            lags.td_u = td;
            lags.td_p = td;
            let problem = lag_embed(&data, &lags)?;
            let split = make_split(problem.n_rows(), &cfg.split.spec(row.validation, seed)?)?;
            let layout = IoLayout::fit(&problem, &split.rows(RowLabel::Train))?;
            let init = derive_seed(seed, 1);
            let start = Instant::now();
            let (eval, log) = if cfg.matrix.family == Family::Srnn {
                let model =
                    SrnnModel::new(layout, cfg.srnn.hidden, cfg.srnn.activation.into(), init);
                let (model, log) = lm_train(model, &problem, &split, &LmConfig::from(cfg.lm))?;
                let secs = timing(start);
                model.write_text(create(&dir.join(format!("model_{tag}.txt")))?)?;
                (evaluate(&model, &data, &split, &row.label, secs)?, log)
            } else {
                let model = LstmModel::new(layout, cfg.lstm.hidden, init);
                let (model, log) =
                    adam_train(model, &problem, &split, &AdamConfig::from(cfg.adam))?;
                let secs = timing(start);
                model.write_text(create(&dir.join(format!("model_{tag}.txt")))?)?;
                (evaluate(&model, &data, &split, &row.label, secs)?, log)
            };
            log.write_csv(create(&dir.join(format!("epochs_{tag}.csv")))?)?;
            meta.push(("init_seed".into(), init.to_string()));
            meta.push(("stop".into(), log.stop.to_string()));
            meta.push((
                "epochs".into(),
                log.records.last().map_or(0, |r| r.epoch).to_string(),
            ));
            eval
        }
    };
    write_plot_csv(
        data.output().values(),
        &eval.one_step,
        &eval.free_run,
        create(&dir.join(format!("plot_{tag}.csv")))?,
    )?;
    if let Some(at) = eval.free_run.diverged_at {
        meta.push(("diverged_at".into(), at.to_string()));
    }
    Ok(SeriesRun { eval, meta })
}

fn run_row(
    cfg: &ExperimentConfig,
    index: usize,
    row: &Row,
    datasets: &[(String, MultiSeriesDataset)],
    out_dir: &Path,
) -> Result<EvaluationReport, CliError> {
    let dir = out_dir
        .join("rows")
        .join(format!("{:02}_{}", index + 1, slug(&row.label)));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let row_seed = derive_seed(cfg.seed, index as u64);
    let mut meta = String::new();
    writeln!(meta, "label = {}", row.label).unwrap();
    writeln!(meta, "family = {}", cfg.matrix.family).unwrap();
    writeln!(meta, "host = {}", host()).unwrap();
    let mut reports = Vec::with_capacity(datasets.len());
    for (s, (id, data)) in datasets.iter().enumerate() {
        let run = run_series(
            cfg,
            row,
            data,
            derive_seed(row_seed, s as u64),
            &dir,
            &s.to_string(),
        )
        .map_err(|e| CliError::Context(format!("series {id}"), Box::new(e)))?;
        writeln!(meta, "[{id}]").unwrap();
        for (k, v) in &run.meta {
            writeln!(meta, "{k} = {v}").unwrap();
        }
        reports.push(run.eval.report);
    }
    let path = dir.join("meta.txt");
    fs::write(&path, meta).map_err(|e| CliError::io(&path, e))?;
    Ok(aggregate(&reports)?)
}

/// Runs every matrix row (up to `jobs` at once; 0 means one per core) and
/// writes `report.csv` in config order. Failing rows get `ERR` cells.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let rows = cfg.rows()?;
    let datasets = load_datasets(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<EvaluationReport, CliError>> = pool.install(|| {
        rows.par_iter()
            .enumerate()
            .map(|(i, row)| run_row(cfg, i, row, &datasets, out_dir))
            .collect()
    });

    let report_path = out_dir.join(REPORT_FILE);
    let mut out = create(&report_path)?;
    let write_err = |e| CliError::io(&report_path, e);
    writeln!(out, "{REPORT_HEADER}").map_err(write_err)?;
    for (row, result) in rows.iter().zip(&results) {
        match result {
            Ok(r) => writeln!(out, "{}", r.csv_row()),
            Err(_) => writeln!(out, "{},ERR,ERR,ERR,ERR,ERR", row.label),
        }
        .map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    Ok(RunOutcome {
        report_path,
        rows: rows
            .into_iter()
            .zip(results)
            .map(|(row, result)| RowOutcome { row, result })
            .collect(),
    })
}
