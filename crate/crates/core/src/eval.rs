//! Relative-MSE metrics for one-step and free-run prediction, divergence
//! detection and report rows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::series::MultiSeriesDataset;
use crate::split::{RowLabel, SplitAssignment};

/// Predictions larger than this multiple of `max |u_ob|` mark a free run as
/// divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

pub const REPORT_HEADER: &str = "method,mser_all,mser_test,mser_train,mser_freerun,time_sec";

/// `‖observed − predicted‖² / ‖observed‖²`.
pub fn relative_mse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            expected: observed.len(),
            found: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::EmptySeries);
    }
    let den: f64 = observed.iter().map(|o| o * o).sum();
    if den == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let num: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p) * (o - p))
        .sum();
    Ok(num / den)
}

/// A model that can be stepped along a dataset. Lagged outputs are read from
/// `output`, which holds observations or, in free run, earlier predictions.
pub trait Predictor {
    type State;

    /// Largest lag of any input; the first prediction is at `t = max_lag()`.
    fn max_lag(&self) -> usize;

    /// Number of exogenous channels the model reads.
    fn channels(&self) -> usize;

    fn init_state(&self) -> Self::State;

    fn step(&self, state: &mut Self::State, t: usize, output: &[f64], exogenous: &[&[f64]]) -> f64;
}

fn check_layout<P: Predictor + ?Sized>(model: &P, data: &MultiSeriesDataset) -> Result<()> {
    if data.channel_count() != model.channels() {
        return Err(Error::LayoutMismatch(format!(
            "model reads {} exogenous channels, dataset has {}",
            model.channels(),
            data.channel_count()
        )));
    }
    if data.len() <= model.max_lag() {
        return Err(Error::SeriesTooShort {
            length: data.len(),
            required: model.max_lag() + 1,
        });
    }
    Ok(())
}

/// Teacher-forced predictions for `t = max_lag .. len`.
pub fn one_step_predict<P: Predictor + ?Sized>(
    model: &P,
    data: &MultiSeriesDataset,
) -> Result<Vec<f64>> {
    check_layout(model, data)?;
    let u = data.output().values();
    let exo: Vec<&[f64]> = data.exogenous().iter().map(|s| s.values()).collect();
    let mut state = model.init_state();
    Ok((model.max_lag()..u.len())
        .map(|t| model.step(&mut state, t, u, &exo))
        .collect())
}

/// Closed-loop predictions over the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeRun {
    /// One value per time step; the first `warmup` are the observations used
    /// as seed, entries after a divergence are NaN.
    pub predictions: Vec<f64>,
    pub warmup: usize,
    pub diverged_at: Option<usize>,
}

impl FreeRun {
    pub fn is_divergent(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// MSEr over `t ≥ warmup`, or [`Metric::Divergent`].
    pub fn mser(&self, observed: &[f64]) -> Result<Metric> {
        if self.is_divergent() {
            return Ok(Metric::Divergent);
        }
        let w = self.warmup.min(observed.len());
        relative_mse(&observed[w..], &self.predictions[w..]).map(Metric::Finite)
    }
}

/// Closed-loop simulation: from `warmup` on, each prediction replaces the
/// observed output for later lags. Exogenous inputs stay observed.
pub fn free_run<P: Predictor + ?Sized>(
    model: &P,
    data: &MultiSeriesDataset,
    warmup: usize,
) -> Result<FreeRun> {
    check_layout(model, data)?;
    if warmup < model.max_lag() {
        return Err(Error::InvalidArgument(format!(
            "warmup {warmup} is shorter than the largest lag {}",
            model.max_lag()
        )));
    }
    let observed = data.output().values();
    let exo: Vec<&[f64]> = data.exogenous().iter().map(|s| s.values()).collect();
    let guard = DIVERGENCE_FACTOR * observed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut history = observed.to_vec();
    let mut state = model.init_state();
    let mut diverged_at = None;
    for t in model.max_lag()..history.len() {
        let y = model.step(&mut state, t, &history, &exo);
        if t >= warmup {
            if !(y.abs() <= guard) {
                diverged_at = Some(t);
                history[t..].fill(f64::NAN);
                break;
            }
            history[t] = y;
        }
    }
    Ok(FreeRun {
        predictions: history,
        warmup,
        diverged_at,
    })
}

/// A relative-MSE value, or the sentinel for an unstable free run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Finite(f64),
    Divergent,
}

impl Metric {
    pub fn value(self) -> f64 {
        match self {
            Metric::Finite(v) => v,
            Metric::Divergent => f64::INFINITY,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Metric::Divergent)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Finite(v) => write!(f, "{v}"),
            Metric::Divergent => f.write_str("inf"),
        }
    }
}

/// One table row: the four MSEr variants plus training time.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: String,
    pub mser_all: f64,
    pub mser_test: f64,
    pub mser_train: f64,
    pub mser_freerun: Metric,
    /// Wall-clock seconds of the fit call; `None` when timing is disabled.
    pub train_seconds: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl EvaluationReport {
    pub fn csv_row(&self) -> String {
        let time = match self.train_seconds {
            Some(s) => format!("{s:.3}"),
            None => "NA".to_string(),
        };
        format!(
            "{},{},{},{},{},{}",
            self.method, self.mser_all, self.mser_test, self.mser_train, self.mser_freerun, time
        )
    }
}

/// Everything [`evaluate`] produces for one series.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub one_step: Vec<f64>,
    pub free_run: FreeRun,
}

/// Scores `model` on `data`. `split` labels the one-step rows
/// (`t = max_lag ..`); the free run starts after `max_lag` samples.
pub fn evaluate<P: Predictor + ?Sized>(
    model: &P,
    data: &MultiSeriesDataset,
    split: &SplitAssignment,
    method: &str,
    train_seconds: Option<f64>,
) -> Result<Evaluation> {
    let pred = one_step_predict(model, data)?;
    let lag = model.max_lag();
    let observed = &data.output().values()[lag..];
    if split.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: pred.len(),
            found: split.len(),
        });
    }
    let subset = |label: RowLabel| -> Result<f64> {
        let rows = split.rows(label);
        let o: Vec<f64> = rows.iter().map(|&r| observed[r]).collect();
        let p: Vec<f64> = rows.iter().map(|&r| pred[r]).collect();
        relative_mse(&o, &p)
    };
    let run = free_run(model, data, lag)?;
    let report = EvaluationReport {
        method: method.to_string(),
        mser_all: relative_mse(observed, &pred)?,
        mser_test: subset(RowLabel::Test)?,
        mser_train: subset(RowLabel::Train)?,
        mser_freerun: run.mser(data.output().values())?,
        train_seconds,
        metadata: BTreeMap::new(),
    };
    Ok(Evaluation {
        report,
        one_step: pred,
        free_run: run,
    })
}

/// Mean over series, `E_i[·]`; a divergent free run anywhere makes the
/// aggregate divergent. Metadata is taken from the first report.
pub fn aggregate(reports: &[EvaluationReport]) -> Result<EvaluationReport> {
    let first = reports.first().ok_or(Error::EmptySeries)?;
    let n = reports.len() as f64;
    let mean = |f: fn(&EvaluationReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mser_freerun = if reports.iter().any(|r| r.mser_freerun.is_divergent()) {
        Metric::Divergent
    } else {
        Metric::Finite(mean(|r| r.mser_freerun.value()))
    };
    let train_seconds = reports
        .iter()
        .map(|r| r.train_seconds)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    Ok(EvaluationReport {
        method: first.method.clone(),
        mser_all: mean(|r| r.mser_all),
        mser_test: mean(|r| r.mser_test),
        mser_train: mean(|r| r.mser_train),
        mser_freerun,
        train_seconds,
        metadata: first.metadata.clone(),
    })
}

pub fn write_report_csv<W: Write>(reports: &[EvaluationReport], mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// `t,observed,predicted_onestep,predicted_freerun`; cells without a
/// prediction are left empty.
pub fn write_plot_csv<W: Write>(
    observed: &[f64],
    one_step: &[f64],
    run: &FreeRun,
    mut out: W,
) -> Result<()> {
    let offset = observed.len() - one_step.len();
    writeln!(out, "t,observed,predicted_onestep,predicted_freerun")?;
    for (t, o) in observed.iter().enumerate() {
        let os = if t >= offset {
            one_step[t - offset].to_string()
        } else {
            String::new()
        };
        let fr = match run.predictions.get(t) {
            Some(v) if t >= run.warmup && v.is_finite() => v.to_string(),
            _ => String::new(),
        };
        writeln!(out, "{t},{o},{os},{fr}")?;
    }
    Ok(())
}
