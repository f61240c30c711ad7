use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::RegressionProblem;

/// Candidates whose step lengths differ by less than this (relative) count
/// as tied; the lowest column index wins.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LarsStep {
    /// Column that joined the active set at the start of this step.
    pub added: usize,
    pub active: Vec<usize>,
    /// Coefficients on every column of the problem at the end of the step;
    /// the bias column carries the intercept.
    pub coefficients: Vec<f64>,
    /// Common absolute correlation of the active columns when the step began.
    pub max_correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarsPath {
    pub steps: Vec<LarsStep>,
}

impl LarsPath {
    /// Columns in entry order.
    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.added).collect()
    }
}

/// Least angle regression over the non-bias columns of `problem` restricted
/// to `rows`. With a bias column, `y` and the features are centred on
/// `rows` and the intercept is recovered afterwards.
pub fn lars_path(
    problem: &RegressionProblem,
    rows: &[usize],
    max_steps: usize,
) -> Result<LarsPath> {
    let candidates: Vec<usize> = (0..problem.n_cols())
        .filter(|&j| !problem.terms[j].is_bias())
        .collect();
    if max_steps > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "max_steps {max_steps} exceeds the {} selectable columns",
            candidates.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("LARS needs at least one row".into()));
    }
    let bias = problem.bias_index();
    let (mut x, mut y) = problem.subset(rows, &candidates);
    let n = rows.len();
    let (mut x_mean, mut y_mean) = (vec![0.0; candidates.len()], 0.0);
    if bias.is_some() {
        for (j, mut col) in x.column_iter_mut().enumerate() {
            x_mean[j] = col.mean();
            col.add_scalar_mut(-x_mean[j]);
        }
        y_mean = y.mean();
        y.add_scalar_mut(-y_mean);
    }
    let rank_cap = if bias.is_some() {
        n.saturating_sub(1)
    } else {
        n
    };
    let steps_total = max_steps.min(rank_cap);
    let p = candidates.len();

    let mut beta = DVector::<f64>::zeros(p);
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut steps = Vec::new();

    let mut c = x.tr_mul(&y);
    let c_max = c.amax();
    if steps_total == 0 || c_max == 0.0 {
        return Ok(LarsPath { steps });
    }
    let first = (0..p)
        .find(|&j| c[j].abs() >= c_max * (1.0 - TIE_TOL))
        .unwrap_or(0);
    active.push(first);
    signs.push(c[first].signum());

    while steps.len() < steps_total {
        let big_c = active.iter().map(|&j| c[j].abs()).fold(0.0, f64::max);
        let k = active.len();
        let xa = DMatrix::from_fn(n, k, |i, a| x[(i, active[a])] * signs[a]);
        let gram = xa.tr_mul(&xa);
        let chol = gram.cholesky().ok_or_else(|| {
            Error::DegenerateCorrelation(format!(
                "active columns {:?} are linearly dependent",
                active
                    .iter()
                    .map(|&j| problem.terms[candidates[j]].to_string())
                    .collect::<Vec<_>>()
            ))
        })?;
        let w0 = chol.solve(&DVector::from_element(k, 1.0));
        let ones_w0 = w0.sum();
        if !(ones_w0 > 0.0) {
            return Err(Error::DegenerateCorrelation(
                "equiangular direction undefined".into(),
            ));
        }
        let big_a = 1.0 / ones_w0.sqrt();
        let w = w0 * big_a;
        let u = &xa * &w;
        let a = x.tr_mul(&u);

        let mut next: Option<(usize, f64)> = None;
        if k < p && k < rank_cap {
            for j in (0..p).filter(|j| !active.contains(j)) {
                for (num, den) in [(big_c - c[j], big_a - a[j]), (big_c + c[j], big_a + a[j])] {
                    if den > TIE_TOL * big_a {
                        let gamma = num.max(0.0) / den;
                        let better = match next {
                            None => true,
                            Some((_, g)) => gamma < g * (1.0 - TIE_TOL) - f64::MIN_POSITIVE,
                        };
                        if better {
                            next = Some((j, gamma));
                        }
                    }
                }
            }
        }
        let gamma = match next {
            Some((_, g)) if g < big_c / big_a => g,
            _ => {
                next = None;
                big_c / big_a
            }
        };
        for (idx, &j) in active.iter().enumerate() {
            beta[j] += gamma * signs[idx] * w[idx];
        }
        c = x.tr_mul(&(&y - &x * &beta));

        let mut coefficients = vec![0.0; problem.n_cols()];
        for (j, &col) in candidates.iter().enumerate() {
            coefficients[col] = beta[j];
        }
        if let Some(b) = bias {
            coefficients[b] = y_mean
                - x_mean
                    .iter()
                    .zip(beta.iter())
                    .map(|(m, b)| m * b)
                    .sum::<f64>();
        }
        steps.push(LarsStep {
            added: candidates[*active.last().expect("active set is non-empty")],
            active: active.iter().map(|&j| candidates[j]).collect(),
            coefficients,
            max_correlation: big_c,
        });

        match next {
            Some((j, _)) if steps.len() < steps_total => {
                active.push(j);
                signs.push(if c[j] != 0.0 { c[j].signum() } else { 1.0 });
            }
            _ => break,
        }
    }
    Ok(LarsPath { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureTerm, Lagged, Scaling};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(x: DMatrix<f64>, y: Vec<f64>, bias: bool) -> RegressionProblem {
        let p = x.ncols();
        let terms = (0..p)
            .map(|j| {
                if bias && j == 0 {
                    FeatureTerm::Bias
                } else {
                    FeatureTerm::linear(Lagged::Output { lag: j + 1 })
                }
            })
            .collect();
        RegressionProblem {
            times: (0..y.len()).collect(),
            y,
            x,
            terms,
            scaling: Scaling::identity(p),
            channels: 0,
        }
    }

    fn random(rng: &mut ChaCha8Rng, n: usize, p: usize, bias: bool) -> RegressionProblem {
        let x = DMatrix::from_fn(n, p, |_, j| {
            if bias && j == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        problem(x, y, bias)
    }

    /// Correlations of every column with the residual of `beta`, computed
    /// from scratch on centred data when a bias is present.
    fn correlations(p: &RegressionProblem, beta: &[f64]) -> Vec<f64> {
        let n = p.n_rows();
        let r: Vec<f64> = (0..n)
            .map(|i| p.y[i] - (0..p.n_cols()).map(|j| p.x[(i, j)] * beta[j]).sum::<f64>())
            .collect();
        (0..p.n_cols())
            .map(|j| {
                let mean = if p.bias_index().is_some() {
                    p.x.column(j).mean()
                } else {
                    0.0
                };
                (0..n).map(|i| (p.x[(i, j)] - mean) * r[i]).sum()
            })
            .collect()
    }

    #[test]
    fn first_entry_is_max_correlation() {
        // orthonormal columns, Xᵀy = (3, 1)
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let path = lars_path(&problem(x, vec![3.0, 1.0], false), &[0, 1], 2).unwrap();
        assert_eq!(path.order(), vec![0, 1]);
        assert!((path.steps[0].coefficients[0] - 2.0).abs() < 1e-15);
        assert_eq!(path.steps[0].coefficients[1], 0.0);
    }

    #[test]
    fn single_feature_path_is_ols() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 5.0]);
        let y = vec![2.0, 3.0, 7.0, 9.0];
        let path = lars_path(&problem(x, y, false), &[0, 1, 2, 3], 1).unwrap();
        assert_eq!(path.steps.len(), 1);
        let ols = (2.0 + 6.0 + 21.0 + 45.0) / (1.0 + 4.0 + 9.0 + 25.0);
        assert!((path.steps[0].coefficients[0] - ols).abs() < 1e-14);
    }

    #[test]
    fn equal_correlation_along_the_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bias in [false, true] {
            for _ in 0..25 {
                let p = random(&mut rng, 8, 5, bias);
                let cols = if bias { 4 } else { 5 };
                let rows: Vec<usize> = (0..8).collect();
                let path = lars_path(&p, &rows, cols).unwrap();
                for (s, step) in path.steps.iter().enumerate() {
                    let c = correlations(&p, &step.coefficients);
                    let mut tied = step.active.clone();
                    if let Some(next) = path.steps.get(s + 1) {
                        tied.push(next.added);
                    }
                    let mags: Vec<f64> = tied.iter().map(|&j| c[j].abs()).collect();
                    let hi = mags.iter().cloned().fold(0.0, f64::max);
                    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
                    assert!(hi - lo <= 1e-8, "step {s}: {mags:?}");
                    // inactive columns never exceed the active level
                    for j in
                        (0..p.n_cols()).filter(|j| !tied.contains(j) && Some(*j) != p.bias_index())
                    {
                        assert!(c[j].abs() <= hi + 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn full_path_ends_at_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for bias in [false, true] {
            for _ in 0..20 {
                let (n, p) = (rng.random_range(8..30), rng.random_range(2..7));
                let prob = random(&mut rng, n, p, bias);
                let rows: Vec<usize> = (0..n).collect();
                let steps = if bias { p - 1 } else { p };
                let path = lars_path(&prob, &rows, steps).unwrap();
                assert_eq!(path.steps.len(), steps);
                let xt = prob.x.transpose();
                let ols = (&xt * &prob.x)
                    .cholesky()
                    .unwrap()
                    .solve(&(xt * DVector::from_vec(prob.y.clone())));
                let last = &path.steps.last().unwrap().coefficients;
                for j in 0..p {
                    assert!((last[j] - ols[j]).abs() <= 1e-6 * (1.0 + ols[j].abs()));
                }
            }
        }
    }

    #[test]
    fn truncated_path_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random(&mut rng, 20, 6, false);
        let rows: Vec<usize> = (0..20).collect();
        let full = lars_path(&p, &rows, 6).unwrap();
        let part = lars_path(&p, &rows, 3).unwrap();
        assert_eq!(part.steps[..], full.steps[..3]);
        assert!(lars_path(&p, &rows, 7).is_err());
        assert!(lars_path(&p, &rows, 0).unwrap().steps.is_empty());
    }

    #[test]
    fn exact_ties_go_to_lowest_index() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let path = lars_path(&problem(x, vec![2.0, 2.0], false), &[0, 1], 2).unwrap();
        assert_eq!(path.order(), vec![0, 1]);
    }
}
