use nalgebra::DVector;

use super::solve::{lasso_beta, ols_beta, ridge_beta, Design, LassoOptions};
use super::{lars_path, LinearModel, Method};
use crate::error::{Error, Result};
use crate::eval::relative_mse;
use crate::features::{standardize, RegressionProblem};
use crate::split::{RowLabel, SplitAssignment};

/// How many LARS entries to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LarsKeep {
    /// Every column; LARS is skipped.
    All,
    Count(usize),
    /// Fraction of the selectable columns, rounded up.
    Fraction(f64),
    /// The step with the lowest validation MSEr, or all columns when the
    /// split has no validation rows.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CvSpec {
    /// Explicit λ grid; by default 20 log-spaced points in
    /// `[1e-4·λ_max, λ_max]`.
    pub grid: Option<Vec<f64>>,
    /// Pick the largest λ within one standard error of the best mean.
    pub one_se: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    /// `fold_mser[g][f]`: validation MSEr of grid point `g` on fold `f`.
    pub fold_mser: Vec<Vec<f64>>,
    pub mean_mser: Vec<f64>,
    pub chosen_lambda: f64,
    pub one_se: bool,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub method: Method,
    /// Fixed strength, ignored when `cv` is set.
    pub lambda: f64,
    pub cv: Option<CvSpec>,
    pub lars_keep: LarsKeep,
    pub lasso: LassoOptions,
}

impl PipelineOptions {
    pub fn new(method: Method, lambda: f64) -> Self {
        PipelineOptions {
            method,
            lambda: if method == Method::Ols { 0.0 } else { lambda },
            cv: None,
            lars_keep: LarsKeep::Auto,
            lasso: LassoOptions::default(),
        }
    }

    pub fn with_cv(mut self, cv: CvSpec) -> Self {
        self.cv = Some(cv);
        self
    }

    pub fn keep(mut self, keep: LarsKeep) -> Self {
        self.lars_keep = keep;
        self
    }
}

fn fit_beta(
    problem: &RegressionProblem,
    rows: &[usize],
    cols: &[usize],
    method: Method,
    lambda: f64,
    lasso: &LassoOptions,
) -> Result<DVector<f64>> {
    match method {
        Method::Ols => ols_beta(problem, rows, cols),
        Method::Ridge => ridge_beta(problem, rows, cols, lambda),
        Method::Lasso => lasso_beta(problem, rows, cols, lambda, lasso),
    }
}

fn predict(
    problem: &RegressionProblem,
    rows: &[usize],
    cols: &[usize],
    beta: &DVector<f64>,
) -> Vec<f64> {
    rows.iter()
        .map(|&r| {
            cols.iter()
                .zip(beta.iter())
                .map(|(&j, b)| problem.x[(r, j)] * b)
                .sum()
        })
        .collect()
}

fn log_grid(hi: f64, points: usize) -> Vec<f64> {
    let lo = 1e-4 * hi;
    (0..points)
        .map(|i| {
            let s = i as f64 / (points - 1) as f64;
            (lo.ln() + s * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

/// LARS selection on the training rows, then calibration. With `cv`, λ is
/// chosen by k-fold over the non-test rows and the model refitted on all of
/// them; otherwise the fit uses the training rows and `opts.lambda`.
/// Features are standardised with training-row statistics first.
pub fn fit_pipeline(
    problem: &RegressionProblem,
    split: &SplitAssignment,
    opts: &PipelineOptions,
) -> Result<(LinearModel, Option<CvReport>)> {
    if split.len() != problem.n_rows() {
        return Err(Error::LengthMismatch {
            expected: problem.n_rows(),
            found: split.len(),
        });
    }
    if opts.method == Method::Ols && opts.cv.is_some() {
        return Err(Error::InvalidArgument(
            "OLS has no λ to cross-validate".into(),
        ));
    }
    let train = split.rows(RowLabel::Train);
    let val = split.rows(RowLabel::Val);
    if train.is_empty() {
        return Err(Error::InvalidSplit("no training rows".into()));
    }
    let z = standardize(problem, &train)?;
    let bias = z.bias_index();
    let selectable: Vec<usize> = (0..z.n_cols()).filter(|&j| Some(j) != bias).collect();

    let kept: Vec<usize> = match opts.lars_keep {
        LarsKeep::All => selectable.clone(),
        LarsKeep::Auto if val.is_empty() => selectable.clone(),
        keep => {
            let path = lars_path(&z, &train, selectable.len())?;
            let steps = match keep {
                LarsKeep::Count(k) => k.min(path.steps.len()),
                LarsKeep::Fraction(f) => {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "LARS fraction {f} not in (0, 1]"
                        )));
                    }
                    ((f * selectable.len() as f64).ceil() as usize).min(path.steps.len())
                }
                _ => {
                    let y_val: Vec<f64> = val.iter().map(|&r| z.y[r]).collect();
                    let all: Vec<usize> = (0..z.n_cols()).collect();
                    let mut best = (f64::INFINITY, 0);
                    for (s, step) in path.steps.iter().enumerate() {
                        let beta = DVector::from_column_slice(&step.coefficients);
                        let m = relative_mse(&y_val, &predict(&z, &val, &all, &beta))?;
                        if m < best.0 {
                            best = (m, s + 1);
                        }
                    }
                    best.1
                }
            };
            path.order().into_iter().take(steps).collect()
        }
    };
    let mut cols: Vec<usize> = bias.into_iter().chain(kept.iter().copied()).collect();
    cols.sort_unstable();
    let selected: Vec<String> = kept.iter().map(|&j| z.terms[j].to_string()).collect();

    let (fit_rows, lambda, report) = match &opts.cv {
        None => (train, opts.lambda, None),
        Some(cv) => {
            let report = cross_validate(&z, split, &cols, opts, cv)?;
            (split.non_test_rows(), report.chosen_lambda, Some(report))
        }
    };
    let beta = fit_beta(&z, &fit_rows, &cols, opts.method, lambda, &opts.lasso)?;
    let mut full = vec![0.0; z.n_cols()];
    for (k, &j) in cols.iter().enumerate() {
        full[j] = beta[k];
    }
    let model = LinearModel::from_scaled(&z, &full, selected, opts.method, lambda);
    Ok((model, report))
}

fn cross_validate(
    z: &RegressionProblem,
    split: &SplitAssignment,
    cols: &[usize],
    opts: &PipelineOptions,
    cv: &CvSpec,
) -> Result<CvReport> {
    let folds = split.folds();
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs ≥ 2 folds, split has {folds}"
        )));
    }
    let pool = split.non_test_rows();
    let grid = match &cv.grid {
        Some(g) if g.is_empty() => return Err(Error::InvalidArgument("empty λ grid".into())),
        Some(g) => {
            if let Some(bad) = g.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "λ grid entry {bad} is not finite and ≥ 0"
                )));
            }
            g.clone()
        }
        None => {
            let hi = match opts.method {
                Method::Lasso => Design::new(z, &pool, cols).lambda_max(),
                // trace of the penalised Gram matrix bounds its largest eigenvalue
                _ => cols
                    .iter()
                    .filter(|&&j| !z.terms[j].is_bias())
                    .map(|&j| pool.iter().map(|&r| z.x[(r, j)].powi(2)).sum::<f64>())
                    .sum(),
            };
            if !(hi > 0.0) {
                return Err(Error::InvalidArgument(
                    "λ_max is zero; nothing to cross-validate".into(),
                ));
            }
            log_grid(hi, 20)
        }
    };

    let mut fold_mser = vec![vec![0.0; folds]; grid.len()];
    for f in 0..folds {
        let held: Vec<usize> = pool
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| i % folds == f)
            .map(|(_, r)| r)
            .collect();
        let fit: Vec<usize> = pool
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| i % folds != f)
            .map(|(_, r)| r)
            .collect();
        let observed: Vec<f64> = held.iter().map(|&r| z.y[r]).collect();
        for (g, &lambda) in grid.iter().enumerate() {
            let beta = fit_beta(z, &fit, cols, opts.method, lambda, &opts.lasso)?;
            fold_mser[g][f] = relative_mse(&observed, &predict(z, &held, cols, &beta))?;
        }
    }
    let mean_mser: Vec<f64> = fold_mser
        .iter()
        .map(|m| m.iter().sum::<f64>() / folds as f64)
        .collect();
    let best = (0..grid.len()).fold(0, |b, g| if mean_mser[g] < mean_mser[b] { g } else { b });
    let chosen = if cv.one_se {
        let m = &fold_mser[best];
        let mean = mean_mser[best];
        let sd = (m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (folds - 1) as f64).sqrt();
        let limit = mean + sd / (folds as f64).sqrt();
        (0..grid.len())
            .filter(|&g| mean_mser[g] <= limit)
            .max_by(|&a, &b| grid[a].total_cmp(&grid[b]))
            .unwrap_or(best)
    } else {
        best
    };
    Ok(CvReport {
        chosen_lambda: grid[chosen],
        lambda_grid: grid,
        fold_mser,
        mean_mser,
        one_se: cv.one_se,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{lag_embed, poly_expand, LagSpec, PolySpec};
    use crate::ingest::{synth_arx, SynthArx};
    use crate::linreg::ols_fit;
    use crate::split::{make_split, SplitSpec};

    fn arx_problem(noise: f64, seed: u64) -> RegressionProblem {
        let d = synth_arx(
            &SynthArx::new(vec![0.5, -0.2], vec![vec![0.8, 0.3]], 400, seed).noise(noise),
        )
        .unwrap();
        poly_expand(
            &lag_embed(&d, &LagSpec::uniform(2)).unwrap(),
            &PolySpec::linear(),
        )
        .unwrap()
    }

    #[test]
    fn ols_baseline_has_zero_lambda() {
        let p = arx_problem(0.1, 1);
        let split = make_split(p.n_rows(), &SplitSpec::with_validation(1)).unwrap();
        let (m, cv) = fit_pipeline(&p, &split, &PipelineOptions::new(Method::Ols, 5.0)).unwrap();
        assert_eq!((m.method, m.lambda), (Method::Ols, 0.0));
        assert!(cv.is_none());
        assert!(fit_pipeline(
            &p,
            &split,
            &PipelineOptions::new(Method::Ols, 0.0).with_cv(CvSpec::default())
        )
        .is_err());
    }

    #[test]
    fn keeping_everything_skips_lars() {
        let p = arx_problem(0.1, 2);
        let split = make_split(p.n_rows(), &SplitSpec::with_validation(2)).unwrap();
        let all = fit_pipeline(
            &p,
            &split,
            &PipelineOptions::new(Method::Ridge, 3.0).keep(LarsKeep::All),
        )
        .unwrap()
        .0;
        let count = fit_pipeline(
            &p,
            &split,
            &PipelineOptions::new(Method::Ridge, 3.0).keep(LarsKeep::Count(5)),
        )
        .unwrap()
        .0;
        assert_eq!(all.coefficients, count.coefficients);

        // OLS on all columns does not depend on the standardisation
        let direct = ols_fit(&p, &split.rows(RowLabel::Train)).unwrap();
        let piped = fit_pipeline(
            &p,
            &split,
            &PipelineOptions::new(Method::Ols, 0.0).keep(LarsKeep::All),
        )
        .unwrap()
        .0;
        for (a, b) in direct.coefficients.iter().zip(&piped.coefficients) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn truncated_selection_zeroes_the_rest() {
        let p = arx_problem(0.1, 3);
        let split = make_split(p.n_rows(), &SplitSpec::with_validation(3)).unwrap();
        let m = fit_pipeline(
            &p,
            &split,
            &PipelineOptions::new(Method::Ols, 0.0).keep(LarsKeep::Count(2)),
        )
        .unwrap()
        .0;
        assert_eq!(m.selected.len(), 2);
        let nonzero: Vec<String> = m
            .terms
            .iter()
            .zip(&m.coefficients)
            .filter(|(t, &c)| c != 0.0 && !t.is_bias())
            .map(|(t, _)| t.to_string())
            .collect();
        let mut sel = m.selected.clone();
        sel.sort();
        let mut nz = nonzero.clone();
        nz.sort();
        assert_eq!(sel, nz);
    }

    #[test]
    fn cv_picks_zero_on_noise_free_data() {
        let p = arx_problem(0.0, 4);
        let split = make_split(p.n_rows(), &SplitSpec::with_validation(4)).unwrap();
        let grid = vec![0.0, 0.1, 1.0, 10.0];
        let cv = CvSpec {
            grid: Some(grid.clone()),
            one_se: false,
        };
        for method in [Method::Ridge, Method::Lasso] {
            let (m, rep) = fit_pipeline(
                &p,
                &split,
                &PipelineOptions::new(method, 1.0).with_cv(cv.clone()),
            )
            .unwrap();
            let rep = rep.unwrap();
            let best = rep.mean_mser.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(rep.chosen_lambda, 0.0);
            assert_eq!(rep.mean_mser[0], best);
            assert_eq!(m.lambda, 0.0);
            assert_eq!(rep.folds, 6);
            assert!(rep.fold_mser.iter().all(|f| f.len() == 6));
        }
    }

    #[test]
    fn default_grid_is_twenty_log_points() {
        let p = arx_problem(0.2, 5);
        let split = make_split(p.n_rows(), &SplitSpec::with_validation(5)).unwrap();
        for method in [Method::Ridge, Method::Lasso] {
            let opts = PipelineOptions::new(method, 1.0).with_cv(CvSpec::default());
            let rep = fit_pipeline(&p, &split, &opts).unwrap().1.unwrap();
            assert_eq!(rep.lambda_grid.len(), 20);
            let (lo, hi) = (rep.lambda_grid[0], rep.lambda_grid[19]);
            assert!((lo / hi - 1e-4).abs() < 1e-12);
            assert!(rep.lambda_grid.contains(&rep.chosen_lambda));
            let se = fit_pipeline(
                &p,
                &split,
                &opts.clone().with_cv(CvSpec {
                    grid: None,
                    one_se: true,
                }),
            )
            .unwrap()
            .1
            .unwrap();
            assert!(se.chosen_lambda >= rep.chosen_lambda);
        }
    }

    #[test]
    fn auto_keep_without_validation_keeps_all() {
        let p = arx_problem(0.1, 6);
        let split = make_split(p.n_rows(), &SplitSpec::without_validation(6)).unwrap();
        let m = fit_pipeline(&p, &split, &PipelineOptions::new(Method::Ridge, 1.0))
            .unwrap()
            .0;
        assert_eq!(m.selected.len(), 5);
    }

    #[test]
    fn polynomial_pipeline_runs() {
        let d = synth_arx(&SynthArx::new(vec![0.5], vec![vec![0.8]], 300, 7).noise(0.05)).unwrap();
        let p = poly_expand(
            &lag_embed(&d, &LagSpec::uniform(2)).unwrap(),
            &PolySpec::quadratic(),
        )
        .unwrap();
        let split = make_split(p.n_rows(), &SplitSpec::with_validation(7)).unwrap();
        let (m, _) = fit_pipeline(&p, &split, &PipelineOptions::new(Method::Lasso, 0.01)).unwrap();
        assert_eq!(m.terms.len(), 11);
        assert!(m.coefficients.iter().all(|c| c.is_finite()));
    }
}
