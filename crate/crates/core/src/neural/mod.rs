//! Recurrent ARX models: a shallow tanh network trained by
//! Levenberg-Marquardt and an LSTM trained by Adam.
//!
//! Both consume the rows of a lagged [`RegressionProblem`] as a sequence
//! (teacher forcing) and keep their recurrent state across rows. Inputs and
//! the target are z-scored with training-row statistics stored in the model,
//! so a trained network predicts in raw units through [`Predictor`].
//!
//! [`Predictor`]: crate::eval::Predictor

mod adam;
mod lm;
mod lstm;
mod srnn;
mod text;

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng as _;

pub use adam::{adam_train, learning_rate, Adam, AdamConfig, GradientModel};
pub use lm::{lm_minimize, lm_train, LeastSquares, LmConfig, LmOutcome};
pub use lstm::{LstmModel, LstmState};
pub use srnn::{Activation, SrnnModel};

use crate::error::{Error, Result};
use crate::eval::relative_mse;
use crate::features::{FeatureTerm, LagSpec, RegressionProblem, Scaling};
use crate::rng::Rng;
use crate::split::{RowLabel, SplitAssignment};

/// How a network sees the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// `u(t−1) … u(t−td)` and `p(t) … p(t−td)` per row.
    Lagged,
    /// Only `u(t−1)` and `p(t)`; the recurrence carries the history.
    Raw,
}

impl InputMode {
    pub fn lag_spec(self, td: usize) -> LagSpec {
        match self {
            InputMode::Lagged => LagSpec::uniform(td),
            InputMode::Raw => LagSpec::new(1, 0),
        }
    }
}

/// Feature layout and the z-score maps of inputs and target.
#[derive(Debug, Clone, PartialEq)]
pub struct IoLayout {
    pub terms: Vec<FeatureTerm>,
    pub channels: usize,
    pub input: Scaling,
    pub output_mean: f64,
    pub output_scale: f64,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl IoLayout {
    /// Statistics from `rows` of `problem` (population standard deviation).
    pub fn fit(problem: &RegressionProblem, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "no rows to fit the input scaling".into(),
            ));
        }
        let raw = problem.raw_x();
        let mut input = Scaling::identity(problem.n_cols());
        for j in 0..problem.n_cols() {
            let (m, s) = mean_sd(rows.iter().map(|&r| raw[(r, j)]));
            if !(s > 1e-12 * (1.0 + m.abs())) {
                return Err(Error::ZeroVarianceColumn(problem.terms[j].to_string()));
            }
            input.mean[j] = m;
            input.scale[j] = s;
        }
        let (output_mean, sd) = mean_sd(rows.iter().map(|&r| problem.y[r]));
        if !(sd > 1e-12 * (1.0 + output_mean.abs())) {
            return Err(Error::ZeroVarianceColumn("target".into()));
        }
        Ok(IoLayout {
            terms: problem.terms.clone(),
            channels: problem.channels,
            input,
            output_mean,
            output_scale: sd,
        })
    }

    /// Unscaled layout with `n` anonymous inputs, for tests and hand-built
    /// networks.
    pub fn identity(terms: Vec<FeatureTerm>, channels: usize) -> Self {
        let n = terms.len();
        IoLayout {
            terms,
            channels,
            input: Scaling::identity(n),
            output_mean: 0.0,
            output_scale: 1.0,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.terms.len()
    }

    pub fn max_lag(&self) -> usize {
        self.terms
            .iter()
            .map(FeatureTerm::max_lag)
            .max()
            .unwrap_or(0)
    }

    pub fn encode(&self, t: usize, output: &[f64], exogenous: &[&[f64]]) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .terms
            .iter()
            .map(|term| term.value(t, output, exogenous))
            .collect();
        self.input.apply(&mut x);
        x
    }

    pub fn decode(&self, y: f64) -> f64 {
        y * self.output_scale + self.output_mean
    }

    /// Scaled inputs (one column per row of `problem`) and targets.
    pub fn sequence(&self, problem: &RegressionProblem) -> Result<Sequence> {
        if problem.terms != self.terms {
            return Err(Error::LayoutMismatch(
                "problem columns differ from the network inputs".into(),
            ));
        }
        let raw = problem.raw_x();
        let inputs = DMatrix::from_fn(self.n_inputs(), problem.n_rows(), |j, t| {
            (raw[(t, j)] - self.input.mean[j]) / self.input.scale[j]
        });
        let targets = problem
            .y
            .iter()
            .map(|y| (y - self.output_mean) / self.output_scale)
            .collect();
        Ok(Sequence { inputs, targets })
    }
}

/// Network-ready data: column `t` of `inputs` feeds step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: DMatrix<f64>,
    pub targets: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.nrows()
    }
}

/// MSEr in raw units over `rows` of a scaled prediction sequence.
pub(crate) fn raw_mser(
    layout: &IoLayout,
    seq: &Sequence,
    pred: &[f64],
    rows: &[usize],
) -> Result<f64> {
    let o: Vec<f64> = rows
        .iter()
        .map(|&r| layout.decode(seq.targets[r]))
        .collect();
    let p: Vec<f64> = rows.iter().map(|&r| layout.decode(pred[r])).collect();
    relative_mse(&o, &p)
}

pub(crate) fn check_split(
    seq: &Sequence,
    split: &SplitAssignment,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if split.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            found: split.len(),
        });
    }
    let train = split.rows(RowLabel::Train);
    if train.is_empty() {
        return Err(Error::InvalidSplit("no training rows".into()));
    }
    Ok((train, split.rows(RowLabel::Val)))
}

/// Uniform in `±1/√fan_in`.
pub(crate) fn init_uniform(rng: &mut Rng, out: &mut [f64], fan_in: usize) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in out {
        *v = rng.random_range(-bound..bound);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    MinGradient,
    /// Damping exceeded its ceiling; a normal end of LM training.
    MuOverflow,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::MinGradient => "min_gradient",
            StopReason::MuOverflow => "mu_overflow",
        })
    }
}

/// One optimiser attempt. LM logs every tried step, so an epoch may have
/// several rejected rows before the accepted one.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training MSE in scaled units after the attempt (before the update
    /// for Adam).
    pub loss: f64,
    pub val_mser: Option<f64>,
    /// Damping μ for LM, learning rate for Adam.
    pub mu_or_lr: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub records: Vec<EpochRecord>,
    pub stop: StopReason,
}

impl EpochLog {
    pub fn accepted(&self) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,loss,val_mser,mu_or_lr,accepted")?;
        for r in &self.records {
            let val = r.val_mser.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.loss, val, r.mu_or_lr, r.accepted
            )?;
        }
        Ok(())
    }
}
