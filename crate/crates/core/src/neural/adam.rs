use super::{
    check_split, raw_mser, EpochLog, EpochRecord, LstmModel, Sequence, SrnnModel, StopReason,
};
use crate::error::{Error, Result};
use crate::features::RegressionProblem;
use crate::split::SplitAssignment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub max_epochs: usize,
    /// Global L2 norm the gradient is clipped to.
    pub grad_clip_norm: f64,
    pub lr_init: f64,
    pub lr_drop_period: usize,
    pub lr_drop_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_frequency: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            max_epochs: 1000,
            grad_clip_norm: 1.0,
            lr_init: 0.005,
            lr_drop_period: 800,
            lr_drop_factor: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            validation_frequency: 50,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_init > 0.0
            && self.lr_drop_period > 0
            && self.lr_drop_factor > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.grad_clip_norm > 0.0
            && self.validation_frequency > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("invalid Adam settings".into()))
        }
    }
}

/// Piecewise-constant schedule; `epoch` counts from 1.
pub fn learning_rate(cfg: &AdamConfig, epoch: usize) -> f64 {
    let drops = epoch.saturating_sub(1) / cfg.lr_drop_period;
    cfg.lr_init * cfg.lr_drop_factor.powi(drops as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(n_params: usize, cfg: &AdamConfig) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// A network with a weighted sum-of-squares gradient.
pub trait GradientModel: Clone {
    fn layout(&self) -> &super::IoLayout;
    fn params(&self) -> &[f64];
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    fn predict_sequence(&self, seq: &Sequence) -> Result<Vec<f64>>;
    fn loss_gradient(&self, seq: &Sequence, weights: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl GradientModel for LstmModel {
    fn layout(&self) -> &super::IoLayout {
        &self.layout
    }
    fn params(&self) -> &[f64] {
        LstmModel::params(self)
    }
    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        LstmModel::set_params(self, params)
    }
    fn predict_sequence(&self, seq: &Sequence) -> Result<Vec<f64>> {
        self.forward(seq)
    }
    fn loss_gradient(&self, seq: &Sequence, weights: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.gradient(seq, Some(weights))
    }
}

impl GradientModel for SrnnModel {
    fn layout(&self) -> &super::IoLayout {
        &self.layout
    }
    fn params(&self) -> &[f64] {
        SrnnModel::params(self)
    }
    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        SrnnModel::set_params(self, params)
    }
    fn predict_sequence(&self, seq: &Sequence) -> Result<Vec<f64>> {
        Ok(self.forward(seq)?.0)
    }
    fn loss_gradient(&self, seq: &Sequence, weights: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.gradient(seq, Some(weights))
    }
}

/// Full-batch Adam on the training-row MSE with global gradient clipping.
/// Validation MSEr is measured every `validation_frequency` epochs and the
/// best-scoring parameters are returned when there are validation rows.
pub fn adam_train<M: GradientModel>(
    model: M,
    problem: &RegressionProblem,
    split: &SplitAssignment,
    cfg: &AdamConfig,
) -> Result<(M, EpochLog)> {
    cfg.validate()?;
    let seq = model.layout().sequence(problem)?;
    let (train, val) = check_split(&seq, split)?;
    let mut weights = vec![0.0; seq.len()];
    for &t in &train {
        weights[t] = 1.0 / train.len() as f64;
    }
    let mut current = model;
    let mut params = current.params().to_vec();
    let mut opt = Adam::new(params.len(), cfg);
    let mut records = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 1..=cfg.max_epochs {
        let (half_mse, mut grad) = match current.loss_gradient(&seq, &weights) {
            Ok(v) => v,
            Err(Error::NonFiniteGradient) => return Err(Error::NonFiniteLoss { epoch }),
            Err(e) => return Err(e),
        };
        if !half_mse.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > cfg.grad_clip_norm {
            let s = cfg.grad_clip_norm / norm;
            grad.iter_mut().for_each(|g| *g *= s);
        }
        let lr = learning_rate(cfg, epoch);
        opt.step(&mut params, &grad, lr);
        current.set_params(&params)?;

        let check =
            !val.is_empty() && (epoch % cfg.validation_frequency == 0 || epoch == cfg.max_epochs);
        let val_mser = if check {
            let pred = current.predict_sequence(&seq)?;
            let v = raw_mser(current.layout(), &seq, &pred, &val)?;
            if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, params.clone()));
            }
            Some(v)
        } else {
            None
        };
        records.push(EpochRecord {
            epoch,
            loss: 2.0 * half_mse,
            val_mser,
            mu_or_lr: lr,
            accepted: true,
        });
    }
    if let Some((_, p)) = best {
        current.set_params(&p)?;
    }
    Ok((
        current,
        EpochLog {
            records,
            stop: StopReason::MaxEpochs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{lag_embed, LagSpec};
    use crate::neural::IoLayout;
    use crate::series::{MultiSeriesDataset, TimeSeries};
    use crate::split::{make_split, RowLabel, SplitSpec};

    #[test]
    fn first_step_moves_by_the_learning_rate() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(1, &cfg);
        let mut w = [0.0];
        adam.step(&mut w, &[2.0], cfg.lr_init);
        assert!((w[0] + 0.005).abs() < 1e-9, "{}", w[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(3, &cfg);
        let mut w = [0.3, -1.0, 2.0];
        for _ in 0..10 {
            adam.step(&mut w, &[0.0; 3], 0.005);
        }
        assert_eq!(w, [0.3, -1.0, 2.0]);
    }

    #[test]
    fn schedule_drops_after_the_period() {
        let cfg = AdamConfig::default();
        assert_eq!(learning_rate(&cfg, 1), 0.005);
        assert_eq!(learning_rate(&cfg, 800), 0.005);
        assert!((learning_rate(&cfg, 801) - 0.001).abs() < 1e-15);
        assert!((learning_rate(&cfg, 1601) - 0.0002).abs() < 1e-15);
    }

    fn toy() -> (RegressionProblem, SplitAssignment) {
        let u: Vec<f64> = (0..120)
            .map(|k| (0.3 * k as f64).sin() + 0.1 * (k % 7) as f64)
            .collect();
        let data = MultiSeriesDataset::autoregressive(TimeSeries::hourly("u", u).unwrap());
        let prob = lag_embed(&data, &LagSpec::uniform(2)).unwrap();
        let split = make_split(prob.n_rows(), &SplitSpec::with_validation(4)).unwrap();
        (prob, split)
    }

    #[test]
    fn lstm_training_reduces_loss_and_is_deterministic() {
        let (prob, split) = toy();
        let layout = IoLayout::fit(&prob, &split.rows(RowLabel::Train)).unwrap();
        let cfg = AdamConfig {
            max_epochs: 200,
            ..AdamConfig::default()
        };
        let run = || adam_train(LstmModel::new(layout.clone(), 6, 5), &prob, &split, &cfg).unwrap();
        let (m1, log) = run();
        let (m2, _) = run();
        assert_eq!(m1, m2);
        assert_eq!(log.records.len(), 200);
        assert!(log.records.last().unwrap().loss < 0.5 * log.records[0].loss);
        let vals: Vec<usize> = log
            .records
            .iter()
            .filter(|r| r.val_mser.is_some())
            .map(|r| r.epoch)
            .collect();
        assert_eq!(vals, vec![50, 100, 150, 200]);
    }

    #[test]
    fn diverging_parameters_report_the_epoch() {
        let (prob, split) = toy();
        let layout = IoLayout::fit(&prob, &split.rows(RowLabel::Train)).unwrap();
        let mut model = SrnnModel::new(layout, 3, crate::neural::Activation::Identity, 1);
        let n = model.n_params();
        model.set_params(&vec![1e200; n]).unwrap();
        let err = adam_train(model, &prob, &split, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1 }), "{err:?}");
    }
}
