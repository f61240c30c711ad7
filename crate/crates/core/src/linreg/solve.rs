use nalgebra::{DMatrix, DVector};

use super::{LinearModel, Method};
use crate::error::{Error, Result};
use crate::features::RegressionProblem;

/// Relative size of an R diagonal entry below which a column counts as
/// dependent on the ones before it.
const RANK_TOL: f64 = 1e-10;

fn all_columns(problem: &RegressionProblem) -> Vec<usize> {
    (0..problem.n_cols()).collect()
}

fn names(problem: &RegressionProblem, cols: &[usize]) -> Vec<String> {
    cols.iter().map(|&j| problem.terms[j].to_string()).collect()
}

fn scatter(n: usize, cols: &[usize], beta: &DVector<f64>) -> Vec<f64> {
    let mut full = vec![0.0; n];
    for (k, &j) in cols.iter().enumerate() {
        full[j] = beta[k];
    }
    full
}

/// Least squares by Householder QR. A column whose R diagonal vanishes is
/// reported together with the earlier columns it depends on.
pub(crate) fn ols_beta(
    problem: &RegressionProblem,
    rows: &[usize],
    cols: &[usize],
) -> Result<DVector<f64>> {
    if rows.len() < cols.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot determine {} coefficients",
            rows.len(),
            cols.len()
        )));
    }
    if cols.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let (x, y) = problem.subset(rows, cols);
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let qr = x.qr();
    let r = qr.r();
    let scale = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    for j in 0..cols.len() {
        if r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
            let mut dependent = Vec::new();
            if j > 0 {
                let head = r.view((0, 0), (j, j)).into_owned();
                let rhs = r.view((0, j), (j, 1)).into_owned();
                if let Some(c) = head.solve_upper_triangular(&rhs) {
                    let big = c.amax();
                    dependent.extend((0..j).filter(|&i| c[i].abs() > 1e-8 * big).map(|i| cols[i]));
                }
            }
            dependent.push(cols[j]);
            return Err(Error::RankDeficient {
                columns: names(problem, &dependent),
            });
        }
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SolveFailed("triangular solve".into()))
}

/// Ordinary least squares on all columns of `problem` over `rows`.
pub fn ols_fit(problem: &RegressionProblem, rows: &[usize]) -> Result<LinearModel> {
    let cols = all_columns(problem);
    let beta = ols_beta(problem, rows, &cols)?;
    let full = scatter(problem.n_cols(), &cols, &beta);
    Ok(LinearModel::from_scaled(
        problem,
        &full,
        names(problem, &cols),
        Method::Ols,
        0.0,
    ))
}

/// Minimises `‖y − Xβ‖² + λ‖β_pen‖²` as the least-squares problem on
/// `[X; √λ·D]`, `D` the identity with the bias entry zeroed.
pub(crate) fn ridge_beta(
    problem: &RegressionProblem,
    rows: &[usize],
    cols: &[usize],
    lambda: f64,
) -> Result<DVector<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be finite and ≥ 0, got {lambda}"
        )));
    }
    if cols.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let (x, y) = problem.subset(rows, cols);
    let (n, p) = (rows.len(), cols.len());
    let root = lambda.sqrt();
    let mut a = DMatrix::zeros(n + p, p);
    a.view_mut((0, 0), (n, p)).copy_from(&x);
    for (k, &j) in cols.iter().enumerate() {
        if !problem.terms[j].is_bias() {
            a[(n + k, k)] = root;
        }
    }
    let mut b = DVector::zeros(n + p);
    b.rows_mut(0, n).copy_from(&y);
    let scale = a.column_iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let qr = a.qr();
    let r = qr.r();
    if (0..p).any(|j| r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::SolveFailed("ridge system is singular".into()));
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::SolveFailed("triangular solve".into()))
}

/// Ridge regression on all columns; the bias column is not penalised.
pub fn ridge_fit(problem: &RegressionProblem, rows: &[usize], lambda: f64) -> Result<LinearModel> {
    let cols = all_columns(problem);
    let beta = ridge_beta(problem, rows, &cols, lambda)?;
    let full = scatter(problem.n_cols(), &cols, &beta);
    Ok(LinearModel::from_scaled(
        problem,
        &full,
        names(problem, &cols),
        Method::Ridge,
        lambda,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// KKT tolerance: absolute for inactive and unpenalised coordinates,
    /// relative to λ for active ones.
    pub tol: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Columnar copy of the sub-design used by coordinate descent.
pub(crate) struct Design {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    penalized: Vec<bool>,
    sq: Vec<f64>,
}

impl Design {
    pub(crate) fn new(problem: &RegressionProblem, rows: &[usize], cols: &[usize]) -> Self {
        let n = rows.len() as f64;
        let cols_data: Vec<Vec<f64>> = cols
            .iter()
            .map(|&j| rows.iter().map(|&r| problem.x[(r, j)]).collect())
            .collect();
        let sq = cols_data
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n)
            .collect();
        Design {
            cols: cols_data,
            y: rows.iter().map(|&r| problem.y[r]).collect(),
            penalized: cols.iter().map(|&j| !problem.terms[j].is_bias()).collect(),
            sq,
        }
    }

    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    fn dot(&self, j: usize, r: &[f64]) -> f64 {
        self.cols[j].iter().zip(r).map(|(a, b)| a * b).sum()
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, x) in r.iter_mut().zip(&self.cols[j]) {
                    *ri -= b * x;
                }
            }
        }
        r
    }

    /// Smallest λ at which every penalised coefficient is zero.
    pub(crate) fn lambda_max(&self) -> f64 {
        // fit the unpenalised columns first, then correlate
        let mut beta = vec![0.0; self.cols.len()];
        let mut r = self.y.clone();
        for _ in 0..1000 {
            let mut moved = 0.0f64;
            for j in (0..self.cols.len()).filter(|&j| !self.penalized[j] && self.sq[j] > 0.0) {
                let step = self.dot(j, &r) / self.n() / self.sq[j];
                beta[j] += step;
                for (ri, x) in r.iter_mut().zip(&self.cols[j]) {
                    *ri -= step * x;
                }
                moved = moved.max(step.abs());
            }
            if moved <= 1e-15 * (1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()))) {
                break;
            }
        }
        (0..self.cols.len())
            .filter(|&j| self.penalized[j])
            .map(|j| (self.dot(j, &r) / self.n()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest KKT violation of `beta` at `lambda`, scaled so that the
    /// stopping rule is `violation ≤ tol`.
    fn kkt_violation(&self, beta: &[f64], r: &[f64], lambda: f64) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.cols.len() {
            let g = self.dot(j, r) / self.n();
            let v = if !self.penalized[j] {
                g.abs()
            } else if beta[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * beta[j].signum()).abs() / if lambda > 0.0 { lambda } else { 1.0 }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Exact solution of the stationarity conditions on the support of
    /// `beta` with its current signs; `None` if that system is singular.
    fn signed_solve(&self, lambda: f64, beta: &[f64]) -> Option<Vec<f64>> {
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        if support.is_empty() {
            return None;
        }
        let k = support.len();
        let n = self.n();
        let gram = DMatrix::from_fn(k, k, |a, b| {
            self.cols[support[a]]
                .iter()
                .zip(&self.cols[support[b]])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / n
        });
        let rhs = DVector::from_fn(k, |a, _| {
            let j = support[a];
            let pen = if self.penalized[j] {
                lambda * beta[j].signum()
            } else {
                0.0
            };
            self.dot(j, &self.y) / n - pen
        });
        let sol = gram.cholesky()?.solve(&rhs);
        let mut out = vec![0.0; beta.len()];
        for (a, &j) in support.iter().enumerate() {
            out[j] = sol[a];
        }
        Some(out)
    }

    /// Feature-sign search on the current support: move towards the
    /// sign-constrained optimum, stopping where a coefficient first reaches
    /// zero, drop it and repeat. The objective never increases, so the
    /// result is a better starting point even when it is not optimal.
    fn refine(&self, lambda: f64, beta: &mut [f64]) {
        for _ in 0..beta.len() + 1 {
            let Some(target) = self.signed_solve(lambda, beta) else {
                return;
            };
            let mut step = 1.0;
            let mut hit = None;
            for j in 0..beta.len() {
                if self.penalized[j] && beta[j] != 0.0 && target[j].signum() != beta[j].signum() {
                    let t = beta[j] / (beta[j] - target[j]);
                    if t < step {
                        step = t;
                        hit = Some(j);
                    }
                }
            }
            for j in 0..beta.len() {
                beta[j] += step * (target[j] - beta[j]);
            }
            match hit {
                None => return,
                Some(j) => beta[j] = 0.0,
            }
        }
    }

    /// Cyclic coordinate descent from `beta`. Whenever the signed support
    /// holds between two checks it is refined by [`Design::refine`], which
    /// settles ill-conditioned supports that coordinate descent only creeps
    /// towards.
    pub(crate) fn lasso(&self, lambda: f64, beta: &mut [f64], opts: &LassoOptions) -> Result<()> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lasso lambda must be finite and ≥ 0, got {lambda}"
            )));
        }
        let pattern = |b: &[f64]| -> Vec<i8> {
            b.iter()
                .map(|v| if *v == 0.0 { 0 } else { v.signum() as i8 })
                .collect()
        };
        let mut r = self.residual(beta);
        let mut violation = f64::INFINITY;
        let mut last_pattern = pattern(beta);
        for sweep in 0..opts.max_iter {
            for j in 0..self.cols.len() {
                if self.sq[j] == 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let z = self.dot(j, &r) / self.n() + self.sq[j] * beta[j];
                let gamma = if self.penalized[j] { lambda } else { 0.0 };
                let new = soft_threshold(z, gamma) / self.sq[j];
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (ri, x) in r.iter_mut().zip(&self.cols[j]) {
                        *ri -= delta * x;
                    }
                    beta[j] = new;
                }
            }
            // the check costs one sweep, so run it on a sparse schedule
            if sweep < 10 || sweep % 10 == 0 || sweep + 1 == opts.max_iter {
                r = self.residual(beta);
                violation = self.kkt_violation(beta, &r, lambda);
                if violation <= opts.tol {
                    return Ok(());
                }
                let current = pattern(beta);
                if current == last_pattern {
                    self.refine(lambda, beta);
                    r = self.residual(beta);
                    violation = self.kkt_violation(beta, &r, lambda);
                    if violation <= opts.tol {
                        return Ok(());
                    }
                }
                last_pattern = pattern(beta);
            }
        }
        Err(Error::NoConvergence {
            max_iter: opts.max_iter,
            violation,
        })
    }
}

/// Lasso with the `1/(2n)` loss convention on all columns.
pub fn lasso_fit(problem: &RegressionProblem, rows: &[usize], lambda: f64) -> Result<LinearModel> {
    lasso_fit_with(problem, rows, lambda, &LassoOptions::default())
}

pub fn lasso_fit_with(
    problem: &RegressionProblem,
    rows: &[usize],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LinearModel> {
    let cols = all_columns(problem);
    let beta = lasso_beta(problem, rows, &cols, lambda, opts)?;
    let full = scatter(problem.n_cols(), &cols, &beta);
    Ok(LinearModel::from_scaled(
        problem,
        &full,
        names(problem, &cols),
        Method::Lasso,
        lambda,
    ))
}

pub(crate) fn lasso_beta(
    problem: &RegressionProblem,
    rows: &[usize],
    cols: &[usize],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<DVector<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "lasso needs at least one row".into(),
        ));
    }
    let design = Design::new(problem, rows, cols);
    let mut beta = vec![0.0; cols.len()];
    design.lasso(lambda, &mut beta, opts)?;
    Ok(DVector::from_vec(beta))
}

/// `max_j |X_jᵀ r₀| / n` over penalised columns, `r₀` the residual of the
/// unpenalised columns alone.
pub fn lambda_max(problem: &RegressionProblem, rows: &[usize]) -> f64 {
    Design::new(problem, rows, &all_columns(problem)).lambda_max()
}
