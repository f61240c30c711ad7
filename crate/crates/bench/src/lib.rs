//! Inputs shared by the benchmarks.

use arxflow_core::features::{
    lag_embed, poly_expand, standardize, LagSpec, PolySpec, RegressionProblem,
};
use arxflow_core::ingest::{synth_arx, SynthArx};
use arxflow_core::neural::{Activation, IoLayout, Sequence, SrnnModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random walk of length `len`.
pub fn walk(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..len)
        .map(|_| {
            x += rng.random_range(-1.0..1.0);
            x
        })
        .collect()
}

/// Standardised quadratic ARX design with two exogenous channels.
pub fn arx_problem(len: usize, td: usize, seed: u64) -> RegressionProblem {
    let data = synth_arx(
        &SynthArx::new(vec![0.5, -0.2], vec![vec![0.0, 0.8], vec![0.3]], len, seed).noise(0.1),
    )
    .expect("valid process");
    let lagged = lag_embed(&data, &LagSpec::uniform(td)).expect("lags fit");
    let poly = poly_expand(&lagged, &PolySpec::quadratic()).expect("expansion");
    let rows: Vec<usize> = (0..poly.n_rows()).collect();
    standardize(&poly, &rows).expect("non-constant columns")
}

/// An SRNN and the sequence it is trained on.
pub fn srnn_case(len: usize, hidden: usize, seed: u64) -> (SrnnModel, Sequence) {
    let data =
        synth_arx(&SynthArx::new(vec![0.6, -0.2], vec![vec![0.0, 0.5]], len, seed).noise(0.05))
            .expect("valid process");
    let problem = lag_embed(&data, &LagSpec::uniform(2)).expect("lags fit");
    let rows: Vec<usize> = (0..problem.n_rows()).collect();
    let layout = IoLayout::fit(&problem, &rows).expect("layout");
    let seq = layout.sequence(&problem).expect("sequence");
    (SrnnModel::new(layout, hidden, Activation::Tanh, seed), seq)
}
