//! ARX against AR on a process whose exogenous channel dominates the output.

use arxflow_core::eval::{evaluate, relative_mse};
use arxflow_core::features::{lag_embed, poly_expand, LagSpec, PolySpec};
use arxflow_core::ingest::{synth_arx, SynthArx};
use arxflow_core::linreg::{fit_pipeline, CvSpec, Method, PipelineOptions};
use arxflow_core::{make_split, MultiSeriesDataset, RowLabel, SplitSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const A: f64 = 0.5;
const B: f64 = 1.0;
const NOISE: f64 = 0.3;

fn process(len: usize, seed: u64, driven: bool) -> MultiSeriesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let p: Vec<f64> = (0..len)
        .map(|_| {
            if driven {
                StandardNormal.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    synth_arx(
        &SynthArx::new(vec![A], vec![vec![B]], len, seed)
            .noise(NOISE)
            .exogenous(vec![p]),
    )
    .unwrap()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Test MSEr of ARX-RR divided by that of AR-RR.
fn ratio(len: usize, seed: u64, opts: &PipelineOptions) -> f64 {
    let d = process(len, seed, true);
    let mut test = Vec::new();
    for data in [d.without_exogenous(), d] {
        let prob = poly_expand(
            &lag_embed(&data, &LagSpec::uniform(2)).unwrap(),
            &PolySpec::linear(),
        )
        .unwrap();
        let split = make_split(prob.n_rows(), &SplitSpec::with_validation(seed)).unwrap();
        let (model, _) = fit_pipeline(&prob, &split, opts).unwrap();
        test.push(
            evaluate(&model, &data, &split, "RR", None)
                .unwrap()
                .report
                .mser_test,
        );
    }
    test[1] / test[0]
}

#[test]
fn exogenous_share_exceeds_half() {
    for seed in 0..5 {
        let full = process(4000, seed, true);
        let noise_only = process(4000, seed, false);
        let driven: Vec<f64> = full
            .output()
            .values()
            .iter()
            .zip(noise_only.output().values())
            .map(|(u, e)| u - e)
            .collect();
        assert!(variance(&driven) / variance(full.output().values()) >= 0.5);
    }
}

#[test]
fn generating_model_oracle_supports_threshold() {
    // ARX truth: a·u(t−1) + b·p(t−1); best AR predictor: a·u(t−1), since
    // p(t−1) is independent of the past outputs.
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let d = process(2000, seed, true);
        let u = d.output().values();
        let p = d.exogenous()[0].values();
        let rows = make_split(u.len() - 2, &SplitSpec::with_validation(seed))
            .unwrap()
            .rows(RowLabel::Test);
        let obs: Vec<f64> = rows.iter().map(|&r| u[r + 2]).collect();
        let arx: Vec<f64> = rows.iter().map(|&r| A * u[r + 1] + B * p[r + 1]).collect();
        let ar: Vec<f64> = rows.iter().map(|&r| A * u[r + 1]).collect();
        ratios.push(relative_mse(&obs, &arx).unwrap() / relative_mse(&obs, &ar).unwrap());
    }
    let mean = ratios.iter().sum::<f64>() / 5.0;
    let expected = NOISE * NOISE / (B * B + NOISE * NOISE);
    assert!((mean - expected).abs() < 0.03, "oracle ratio {mean}");
    assert!(mean < 0.25);
}

#[test]
fn arx_ridge_halves_ar_ridge_error() {
    let cv = PipelineOptions::new(Method::Ridge, 1e4).with_cv(CvSpec::default());
    let mean = (0..5).map(|s| ratio(2000, s, &cv)).sum::<f64>() / 5.0;
    assert!(mean <= 0.5, "cross-validated ridge ratio {mean}");
}

#[test]
fn fixed_lambda_needs_long_series() {
    // λ = 1e4 acts on standardised features, so its strength falls with
    // the row count; with 20000 samples it is mild enough.
    let fixed = PipelineOptions::new(Method::Ridge, 1e4);
    let mean = (0..5).map(|s| ratio(20_000, s, &fixed)).sum::<f64>() / 5.0;
    assert!(mean <= 0.5, "fixed-λ ridge ratio {mean}");
}
