//! Regression problems built from lagged outputs and exogenous inputs.
//!
//! A row for time `t` holds `u(t−1) … u(t−td_u)` followed, per exogenous
//! channel, by `p(t)` (optional) and `p(t−1) … p(t−td_p)`; the target is
//! `u(t)`. Columns are described by [`FeatureTerm`]s, so any model fitted on a
//! problem can rebuild its own inputs during free-run simulation.

mod term;

use nalgebra::{DMatrix, DVector};

pub use term::{FeatureTerm, Lagged};

use crate::error::{Error, Result};
use crate::series::MultiSeriesDataset;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagSpec {
    /// Largest output delay, at least 1.
    pub td_u: usize,
    /// Largest exogenous delay.
    pub td_p: usize,
    /// Feed the contemporaneous `p(t)`.
    pub include_current_p: bool,
    /// Per-channel override of `td_p`.
    pub td_p_per_channel: Option<Vec<usize>>,
}

impl LagSpec {
    pub fn new(td_u: usize, td_p: usize) -> Self {
        LagSpec {
            td_u,
            td_p,
            include_current_p: true,
            td_p_per_channel: None,
        }
    }

    /// Same delay for outputs and inputs.
    pub fn uniform(td: usize) -> Self {
        Self::new(td, td)
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.td_u == 0 {
            return Err(Error::InvalidArgument("td_u must be at least 1".into()));
        }
        if let Some(per) = &self.td_p_per_channel {
            if per.len() != channels {
                return Err(Error::LengthMismatch {
                    expected: channels,
                    found: per.len(),
                });
            }
        }
        Ok(())
    }

    pub fn channel_delay(&self, channel: usize) -> usize {
        self.td_p_per_channel
            .as_ref()
            .and_then(|per| per.get(channel).copied())
            .unwrap_or(self.td_p)
    }

    /// Column layout for `channels` exogenous inputs.
    pub fn layout(&self, channels: usize) -> Vec<FeatureTerm> {
        let mut terms: Vec<FeatureTerm> = (1..=self.td_u)
            .map(|lag| FeatureTerm::linear(Lagged::Output { lag }))
            .collect();
        for channel in 0..channels {
            let first = if self.include_current_p { 0 } else { 1 };
            for lag in first..=self.channel_delay(channel) {
                terms.push(FeatureTerm::linear(Lagged::Exogenous { channel, lag }));
            }
        }
        terms
    }
}

/// Per-column affine map `z = (x − mean) / scale`; identity by default.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaling {
    pub fn identity(cols: usize) -> Self {
        Scaling {
            mean: vec![0.0; cols],
            scale: vec![1.0; cols],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0) && self.scale.iter().all(|&s| s == 1.0)
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }

    /// Maps coefficients on scaled columns to coefficients on raw columns
    /// plus the constant offset this introduces.
    pub fn unscale_coefficients(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let offset = -raw.iter().zip(&self.mean).map(|(b, m)| b * m).sum::<f64>();
        (raw, offset)
    }

    /// `self` followed by `then`, as a single map.
    fn compose(&self, then: &Scaling) -> Scaling {
        let mean = self
            .mean
            .iter()
            .zip(&self.scale)
            .zip(&then.mean)
            .map(|((m1, s1), m2)| m1 + s1 * m2)
            .collect();
        let scale = self
            .scale
            .iter()
            .zip(&then.scale)
            .map(|(s1, s2)| s1 * s2)
            .collect();
        Scaling { mean, scale }
    }
}

/// Targets, design matrix and column descriptions of one ARX regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub y: Vec<f64>,
    /// One row per valid time step, possibly standardised (see `scaling`).
    pub x: DMatrix<f64>,
    pub terms: Vec<FeatureTerm>,
    pub scaling: Scaling,
    /// Dataset index `t` of every row.
    pub times: Vec<usize>,
    /// Exogenous channel count of the source dataset.
    pub channels: usize,
}

impl RegressionProblem {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.terms.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.terms.iter().map(ToString::to_string).collect()
    }

    pub fn bias_index(&self) -> Option<usize> {
        self.terms.iter().position(FeatureTerm::is_bias)
    }

    /// Largest lag referenced by any column.
    pub fn max_lag(&self) -> usize {
        self.terms
            .iter()
            .map(FeatureTerm::max_lag)
            .max()
            .unwrap_or(0)
    }

    /// Design matrix in raw (unscaled) units.
    pub fn raw_x(&self) -> DMatrix<f64> {
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (m, s) = (self.scaling.mean[j], self.scaling.scale[j]);
            col.apply(|v| *v = *v * s + m);
        }
        x
    }

    /// Rows `rows` of the design restricted to columns `cols`, with targets.
    pub fn subset(&self, rows: &[usize], cols: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.x[(rows[r], cols[c])]);
        let y = DVector::from_fn(rows.len(), |r, _| self.y[rows[r]]);
        (x, y)
    }
}

/// Builds a problem from an explicit column layout; `first_t` must cover the
/// largest lag.
pub fn embed_terms(
    data: &MultiSeriesDataset,
    terms: Vec<FeatureTerm>,
) -> Result<RegressionProblem> {
    let max_lag = terms.iter().map(FeatureTerm::max_lag).max().unwrap_or(0);
    let n = data.len();
    if n <= max_lag {
        return Err(Error::SeriesTooShort {
            length: n,
            required: max_lag,
        });
    }
    if let Some(c) = terms.iter().filter_map(FeatureTerm::max_channel).max() {
        if c >= data.channel_count() {
            return Err(Error::LayoutMismatch(format!(
                "feature uses channel p{} but the dataset has {} exogenous channels",
                c + 1,
                data.channel_count()
            )));
        }
    }
    let u = data.output().values();
    let exo: Vec<&[f64]> = data.exogenous().iter().map(|s| s.values()).collect();
    let times: Vec<usize> = (max_lag..n).collect();
    let x = DMatrix::from_fn(times.len(), terms.len(), |r, c| {
        terms[c].value(times[r], u, &exo)
    });
    let y = times.iter().map(|&t| u[t]).collect();
    let cols = terms.len();
    Ok(RegressionProblem {
        y,
        x,
        terms,
        scaling: Scaling::identity(cols),
        times,
        channels: data.channel_count(),
    })
}

/// Lag embedding of a dataset; the first row is at `t = max delay`.
pub fn lag_embed(data: &MultiSeriesDataset, spec: &LagSpec) -> Result<RegressionProblem> {
    spec.validate(data.channel_count())?;
    embed_terms(data, spec.layout(data.channel_count()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolySpec {
    /// 1 or 2.
    pub degree: u32,
    /// Add pairwise products of distinct columns (degree 2 only).
    pub interactions: bool,
    pub include_bias: bool,
}

impl PolySpec {
    /// Degree 2 without interaction terms, with a bias column.
    pub fn quadratic() -> Self {
        PolySpec {
            degree: 2,
            interactions: false,
            include_bias: true,
        }
    }

    pub fn linear() -> Self {
        PolySpec {
            degree: 1,
            interactions: false,
            include_bias: true,
        }
    }
}

/// Polynomial expansion of the raw columns: `[bias] + columns + squares`
/// (+ pairwise products when `interactions`). The result is unscaled.
pub fn poly_expand(problem: &RegressionProblem, spec: &PolySpec) -> Result<RegressionProblem> {
    if !(1..=2).contains(&spec.degree) {
        return Err(Error::InvalidArgument(format!(
            "polynomial degree {} not in 1..=2",
            spec.degree
        )));
    }
    if spec.degree == 1 && spec.interactions {
        return Err(Error::InvalidArgument(
            "interaction terms need degree 2".into(),
        ));
    }
    let raw = problem.raw_x();
    let base: Vec<usize> = (0..problem.n_cols())
        .filter(|&j| !problem.terms[j].is_bias())
        .collect();

    // (term, column recipe) where a recipe multiplies one or two raw columns
    let mut recipe: Vec<(FeatureTerm, Option<(usize, usize)>)> = Vec::new();
    if spec.include_bias || problem.bias_index().is_some() {
        recipe.push((FeatureTerm::Bias, None));
    }
    for &j in &base {
        recipe.push((problem.terms[j].clone(), Some((j, usize::MAX))));
    }
    if spec.degree == 2 {
        for &j in &base {
            recipe.push((problem.terms[j].times(&problem.terms[j]), Some((j, j))));
        }
        if spec.interactions {
            for (a, &i) in base.iter().enumerate() {
                for &j in &base[a + 1..] {
                    recipe.push((problem.terms[i].times(&problem.terms[j]), Some((i, j))));
                }
            }
        }
    }

    let x = DMatrix::from_fn(problem.n_rows(), recipe.len(), |r, c| match recipe[c].1 {
        None => 1.0,
        Some((i, usize::MAX)) => raw[(r, i)],
        Some((i, j)) => raw[(r, i)] * raw[(r, j)],
    });
    let terms: Vec<FeatureTerm> = recipe.into_iter().map(|(t, _)| t).collect();
    let cols = terms.len();
    Ok(RegressionProblem {
        y: problem.y.clone(),
        x,
        terms,
        scaling: Scaling::identity(cols),
        times: problem.times.clone(),
        channels: problem.channels,
    })
}

/// Z-scores every non-bias column with mean and population standard
/// deviation taken over `fit_rows`; the map is recorded in `scaling`.
pub fn standardize(problem: &RegressionProblem, fit_rows: &[usize]) -> Result<RegressionProblem> {
    if fit_rows.is_empty() {
        return Err(Error::InvalidArgument(
            "standardisation needs at least one row".into(),
        ));
    }
    let cols = problem.n_cols();
    let mut step = Scaling::identity(cols);
    let n = fit_rows.len() as f64;
    for j in 0..cols {
        if problem.terms[j].is_bias() {
            continue;
        }
        let mean = fit_rows.iter().map(|&r| problem.x[(r, j)]).sum::<f64>() / n;
        let var = fit_rows
            .iter()
            .map(|&r| (problem.x[(r, j)] - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 * (1.0 + mean.abs())) {
            return Err(Error::ZeroVarianceColumn(problem.terms[j].to_string()));
        }
        step.mean[j] = mean;
        step.scale[j] = sd;
    }
    let mut x = problem.x.clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let (m, s) = (step.mean[j], step.scale[j]);
        col.apply(|v| *v = (*v - m) / s);
    }
    Ok(RegressionProblem {
        y: problem.y.clone(),
        x,
        terms: problem.terms.clone(),
        scaling: problem.scaling.compose(&step),
        times: problem.times.clone(),
        channels: problem.channels,
    })
}
