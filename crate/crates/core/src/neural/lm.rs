use nalgebra::{DMatrix, DVector};

use super::{check_split, raw_mser, EpochLog, EpochRecord, Sequence, SrnnModel, StopReason};
use crate::error::{Error, Result};
use crate::features::RegressionProblem;
use crate::split::SplitAssignment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_epochs: usize,
    /// Stop once the MSE gradient norm falls below this.
    pub min_gradient: f64,
    pub mu_init: f64,
    pub mu_decrease: f64,
    pub mu_increase: f64,
    pub mu_max: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_epochs: 1000,
            min_gradient: 1e-7,
            mu_init: 0.001,
            mu_decrease: 0.1,
            mu_increase: 10.0,
            mu_max: 1e10,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.mu_decrease
            && self.mu_decrease < 1.0
            && 1.0 < self.mu_increase
            && 0.0 < self.mu_init
            && self.mu_init < self.mu_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "LM needs 0 < mu_decrease < 1 < mu_increase and 0 < mu_init < mu_max".into(),
            ))
        }
    }
}

/// A sum-of-squares objective `½‖r(θ)‖²`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;

    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// Residuals and their Jacobian (one row per residual).
    fn jacobian(&self, theta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)>;

    /// Held-out score used to keep the best parameters, if any.
    fn validation(&self, _theta: &[f64]) -> Result<Option<f64>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub log: EpochLog,
}

fn mse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len().max(1) as f64
}

/// Levenberg-Marquardt: each epoch solves `(JᵀJ + μI)δ = −Jᵀr` and retries
/// with `μ·mu_increase` until the loss drops, then continues with
/// `μ·mu_decrease`. Every attempt is logged. When the problem reports a
/// validation score, the parameters with the best score are returned.
pub fn lm_minimize<P: LeastSquares + ?Sized>(
    problem: &P,
    theta0: &[f64],
    cfg: &LmConfig,
) -> Result<LmOutcome> {
    cfg.validate()?;
    if theta0.len() != problem.n_params() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} parameters, got {}",
            problem.n_params(),
            theta0.len()
        )));
    }
    let mut theta = theta0.to_vec();
    let mut mu = cfg.mu_init;
    let mut records = Vec::new();
    let mut best = problem.validation(&theta)?.map(|v| (v, theta.clone()));
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=cfg.max_epochs {
        let (r, jac) = problem.jacobian(&theta)?;
        let loss = mse(&r);
        let g = jac.tr_mul(&DVector::from_column_slice(&r));
        if 2.0 * g.norm() / r.len().max(1) as f64 <= cfg.min_gradient {
            stop = StopReason::MinGradient;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        loop {
            if mu > cfg.mu_max {
                stop = StopReason::MuOverflow;
                break 'epochs;
            }
            let mut damped = jtj.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += mu;
            }
            let trial = damped.cholesky().and_then(|c| {
                let delta = c.solve(&(-&g));
                let cand: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                cand.iter().all(|v| v.is_finite()).then_some(cand)
            });
            let attempt = match trial {
                Some(cand) => match problem.residuals(&cand) {
                    Ok(rr) => Some((mse(&rr), cand)),
                    Err(Error::NonFiniteGradient) => None,
                    Err(e) => return Err(e),
                },
                None => None,
            };
            match attempt {
                Some((new_loss, cand)) if new_loss < loss => {
                    let val = problem.validation(&cand)?;
                    records.push(EpochRecord {
                        epoch,
                        loss: new_loss,
                        val_mser: val,
                        mu_or_lr: mu,
                        accepted: true,
                    });
                    theta = cand;
                    if let Some(v) = val {
                        if best.as_ref().is_none_or(|(b, _)| v < *b) {
                            best = Some((v, theta.clone()));
                        }
                    }
                    mu *= cfg.mu_decrease;
                    break;
                }
                other => {
                    records.push(EpochRecord {
                        epoch,
                        loss: other.map_or(f64::NAN, |(l, _)| l),
                        val_mser: None,
                        mu_or_lr: mu,
                        accepted: false,
                    });
                    mu *= cfg.mu_increase;
                }
            }
        }
    }
    let params = best.map_or(theta, |(_, p)| p);
    Ok(LmOutcome {
        params,
        log: EpochLog { records, stop },
    })
}

struct SrnnObjective<'a> {
    model: &'a SrnnModel,
    seq: Sequence,
    train: Vec<usize>,
    val: Vec<usize>,
}

impl SrnnObjective<'_> {
    fn with(&self, theta: &[f64]) -> Result<SrnnModel> {
        let mut m = self.model.clone();
        m.set_params(theta)?;
        Ok(m)
    }
}

impl LeastSquares for SrnnObjective<'_> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let (pred, _) = self.with(theta)?.forward(&self.seq)?;
        let r: Vec<f64> = self
            .train
            .iter()
            .map(|&t| pred[t] - self.seq.targets[t])
            .collect();
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok(r)
    }

    fn jacobian(&self, theta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.with(theta)?.jacobian(&self.seq, &self.train)
    }

    fn validation(&self, theta: &[f64]) -> Result<Option<f64>> {
        if self.val.is_empty() {
            return Ok(None);
        }
        let (pred, _) = self.with(theta)?.forward(&self.seq)?;
        raw_mser(&self.model.layout, &self.seq, &pred, &self.val).map(Some)
    }
}

/// Teacher-forced LM training of `model` on the training rows of
/// `problem`; the model's layout must match the problem's columns.
pub fn lm_train(
    model: SrnnModel,
    problem: &RegressionProblem,
    split: &SplitAssignment,
    cfg: &LmConfig,
) -> Result<(SrnnModel, EpochLog)> {
    let seq = model.layout.sequence(problem)?;
    let (train, val) = check_split(&seq, split)?;
    let obj = SrnnObjective {
        model: &model,
        seq,
        train,
        val,
    };
    let out = lm_minimize(&obj, model.params(), cfg)?;
    let mut trained = model.clone();
    trained.set_params(&out.params)?;
    Ok((trained, out.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{one_step_predict, relative_mse};
    use crate::features::lag_embed;
    use crate::features::LagSpec;
    use crate::neural::{Activation, IoLayout};
    use crate::series::{MultiSeriesDataset, TimeSeries};
    use crate::split::{make_split, SplitSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) struct Linear {
        pub a: DMatrix<f64>,
        pub b: DVector<f64>,
    }

    impl LeastSquares for Linear {
        fn n_params(&self) -> usize {
            self.a.ncols()
        }
        fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
            Ok((&self.a * DVector::from_column_slice(theta) - &self.b)
                .iter()
                .copied()
                .collect())
        }
        fn jacobian(&self, theta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
            Ok((self.residuals(theta)?, self.a.clone()))
        }
    }

    #[test]
    fn linear_problem_takes_damped_newton_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(200, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(200, |_, _| rng.random_range(-1.0..1.0));
        let opt = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
        let theta0 = DVector::from_column_slice(&[5.0, -3.0, 2.0, 7.0]);
        // first step: (AᵀA + μI)δ = −Aᵀ(Aθ₀ − b) solved through an SVD of the stacked system
        let mut stacked = DMatrix::zeros(204, 4);
        stacked.view_mut((0, 0), (200, 4)).copy_from(&a);
        for d in 0..4 {
            stacked[(200 + d, d)] = 0.001f64.sqrt();
        }
        let mut rhs = DVector::zeros(204);
        rhs.rows_mut(0, 200).copy_from(&(&b - &a * &theta0));
        let first = &theta0 + stacked.svd(true, true).solve(&rhs, 1e-14).unwrap();

        let prob = Linear { a, b };
        let one = LmConfig {
            max_epochs: 1,
            ..LmConfig::default()
        };
        let out = lm_minimize(&prob, theta0.as_slice(), &one).unwrap();
        assert_eq!(out.log.records.len(), 1);
        assert!(out.log.records[0].accepted);
        for (x, y) in out.params.iter().zip(first.iter()) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }

        let out = lm_minimize(&prob, theta0.as_slice(), &LmConfig::default()).unwrap();
        for (x, y) in out.params.iter().zip(opt.iter()) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
        let accepted: Vec<f64> = out.log.accepted().map(|r| r.loss).collect();
        assert!(accepted.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejected_step_multiplies_mu() {
        // a residual whose Gauss-Newton step always overshoots
        struct Steep;
        impl LeastSquares for Steep {
            fn n_params(&self) -> usize {
                1
            }
            fn residuals(&self, t: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![t[0].atan() * 10.0])
            }
            fn jacobian(&self, t: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
                Ok((
                    self.residuals(t)?,
                    DMatrix::from_element(1, 1, 10.0 / (1.0 + t[0] * t[0])),
                ))
            }
        }
        let cfg = LmConfig {
            max_epochs: 20,
            ..LmConfig::default()
        };
        let out = lm_minimize(&Steep, &[3.0], &cfg).unwrap();
        let recs = &out.log.records;
        assert!(recs.iter().any(|r| !r.accepted));
        assert_eq!(recs[0].mu_or_lr, 0.001);
        for w in recs.windows(2) {
            let factor = if w[0].accepted { 0.1 } else { 10.0 };
            assert!((w[1].mu_or_lr / w[0].mu_or_lr - factor).abs() < 1e-12);
        }
        let accepted: Vec<f64> = out.log.accepted().map(|r| r.loss).collect();
        assert!(accepted.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mu_overflow_is_a_stop_reason() {
        struct Flat;
        impl LeastSquares for Flat {
            fn n_params(&self) -> usize {
                1
            }
            fn residuals(&self, _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![1.0])
            }
            fn jacobian(&self, t: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
                // claims a slope that never helps
                Ok((self.residuals(t)?, DMatrix::from_element(1, 1, 1.0)))
            }
        }
        let out = lm_minimize(&Flat, &[0.0], &LmConfig::default()).unwrap();
        assert_eq!(out.log.stop, StopReason::MuOverflow);
        assert_eq!(out.params, vec![0.0]);
        assert!(out.log.records.iter().all(|r| !r.accepted));
    }

    #[test]
    fn fits_a_sine_with_ten_hidden_units() {
        let u: Vec<f64> = (0..200).map(|k| (k as f64).sin()).collect();
        let data = MultiSeriesDataset::autoregressive(TimeSeries::hourly("u", u).unwrap());
        let prob = lag_embed(&data, &LagSpec::new(1, 0)).unwrap();
        let split =
            make_split(prob.n_rows(), &SplitSpec::new(1.0, 0.0, 0.0, 1, 0).unwrap()).unwrap();
        let layout = IoLayout::fit(&prob, &split.rows(crate::RowLabel::Train)).unwrap();
        let model = SrnnModel::new(layout, 10, Activation::Tanh, 3);
        let (trained, log) = lm_train(model, &prob, &split, &LmConfig::default()).unwrap();
        let pred = one_step_predict(&trained, &data).unwrap();
        let obs = &data.output().values()[1..];
        let mse = obs
            .iter()
            .zip(&pred)
            .map(|(o, p)| (o - p).powi(2))
            .sum::<f64>()
            / obs.len() as f64;
        assert!(mse < 1e-3, "mse {mse}, stop {}", log.stop);
        assert!(relative_mse(obs, &pred).unwrap() < 2e-3);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
        let data = MultiSeriesDataset::autoregressive(TimeSeries::hourly("u", u).unwrap());
        let prob = lag_embed(&data, &LagSpec::uniform(2)).unwrap();
        let split = make_split(prob.n_rows(), &SplitSpec::with_validation(1)).unwrap();
        let layout = IoLayout::fit(&prob, &split.rows(crate::RowLabel::Train)).unwrap();
        let cfg = LmConfig {
            max_epochs: 15,
            ..LmConfig::default()
        };
        let run = || {
            lm_train(
                SrnnModel::new(layout.clone(), 4, Activation::Tanh, 2),
                &prob,
                &split,
                &cfg,
            )
            .unwrap()
        };
        let (m1, l1) = run();
        let (m2, l2) = run();
        assert_eq!(m1, m2);
        assert_eq!(l1, l2);
        assert!(l1.records.iter().any(|r| r.val_mser.is_some()));
    }
}
