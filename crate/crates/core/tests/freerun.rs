//! Closed-loop behaviour of trained and hand-built models.

use arxflow_core::eval::free_run;
use arxflow_core::features::{lag_embed, LagSpec};
use arxflow_core::ingest::{synth_arx, SynthArx};
use arxflow_core::linreg::LinearModel;
use arxflow_core::neural::{lm_train, Activation, IoLayout, LmConfig, SrnnModel};
use arxflow_core::{make_split, MultiSeriesDataset, RowLabel, SplitSpec, TimeSeries};

const HORIZON: usize = 500;

/// A daily cycle with a slower weekly swell, always positive.
fn drive(len: usize) -> Vec<f64> {
    use std::f64::consts::TAU;
    (0..len)
        .map(|t| {
            let t = t as f64;
            1.5 + (TAU * t / 24.0).sin() + 0.4 * (TAU * t / 168.0).cos()
        })
        .collect()
}

fn low_noise_arx(seed: u64) -> MultiSeriesDataset {
    synth_arx(
        &SynthArx::new(vec![0.6, -0.2], vec![vec![0.0, 0.5]], HORIZON, seed)
            .noise(0.01)
            .exogenous(vec![drive(HORIZON)]),
    )
    .unwrap()
}

#[test]
fn srnn_arx_free_run_tracks_the_series() {
    for seed in [1, 2] {
        let data = low_noise_arx(seed);
        let problem = lag_embed(&data, &LagSpec::uniform(2)).unwrap();
        let split = make_split(problem.n_rows(), &SplitSpec::with_validation(seed)).unwrap();
        let layout = IoLayout::fit(&problem, &split.rows(RowLabel::Train)).unwrap();
        let model = SrnnModel::new(layout, 10, Activation::Tanh, seed);
        let (model, _) = lm_train(model, &problem, &split, &LmConfig::default()).unwrap();
        let run = free_run(&model, &data, 2).unwrap();
        let score = run.mser(data.output().values()).unwrap();
        assert!(!score.is_divergent());
        assert!(score.value() < 0.05, "seed {seed}: free-run MSEr {score}");
    }
}

#[test]
fn explosive_linear_model_is_divergent() {
    let text = "\
# arxflow-linear 1
method = OLS
lambda = 0.0
convention = none
intercept = 0.0
channels = 0
selected = u[t-1]
term coefficient mean scale
u[t-1] 2.0 0.0 1.0
";
    let model = LinearModel::from_text(text).unwrap();
    let u: Vec<f64> = drive(HORIZON).iter().map(|v| v + 1.0).collect();
    let data = MultiSeriesDataset::autoregressive(TimeSeries::hourly("u", u.clone()).unwrap());
    let run = free_run(&model, &data, 1).unwrap();
    assert!(run.is_divergent());
    let at = run.diverged_at.unwrap();
    assert!(run.predictions[at..].iter().all(|v| v.is_nan()));
    let score = run.mser(&u).unwrap();
    assert!(score.is_divergent());
    assert_eq!(score.to_string(), "inf");
}
