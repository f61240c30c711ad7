use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::{MultiSeriesDataset, TimeSeries};

/// Parameters of a synthetic ARX process
///
/// `u(t) = Σ_j coeffs_u[j-1]·u(t−j) + Σ_c Σ_j coeffs_p[c][j-1]·p_c(t−j) + ε(t)`
///
/// with lags starting at 1, history before `t = 0` taken as zero and
/// `initial[t]` added to `u(t)` for the first samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthArx {
    pub coeffs_u: Vec<f64>,
    pub coeffs_p: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub length: usize,
    pub seed: u64,
    pub initial: Vec<f64>,
    /// Caller-supplied exogenous signals; generated sinusoids otherwise.
    pub exogenous: Option<Vec<Vec<f64>>>,
    pub allow_unstable: bool,
}

impl SynthArx {
    pub fn new(coeffs_u: Vec<f64>, coeffs_p: Vec<Vec<f64>>, length: usize, seed: u64) -> Self {
        SynthArx {
            coeffs_u,
            coeffs_p,
            noise_sd: 0.0,
            length,
            seed,
            initial: Vec::new(),
            exogenous: None,
            allow_unstable: false,
        }
    }

    pub fn noise(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn initial(mut self, initial: Vec<f64>) -> Self {
        self.initial = initial;
        self
    }

    pub fn exogenous(mut self, signals: Vec<Vec<f64>>) -> Self {
        self.exogenous = Some(signals);
        self
    }

    pub fn allow_unstable(mut self) -> Self {
        self.allow_unstable = true;
        self
    }
}

/// Spectral radius of the companion matrix of `1 − Σ a_j z^{-j}`.
pub fn companion_spectral_radius(coeffs: &[f64]) -> f64 {
    let n = coeffs.len();
    if n == 0 {
        return 0.0;
    }
    let mut m = DMatrix::zeros(n, n);
    for (j, &a) in coeffs.iter().enumerate() {
        m[(0, j)] = a;
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Smooth traffic-like driver: offset plus three seeded sinusoids with
/// periods between 6 and 48 samples.
fn smooth_signal(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::seeded(seed);
    let offset = rng.random_range(-0.5..0.5);
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let period = rng.random_range(6.0..48.0);
            let amplitude = rng.random_range(0.5..1.5);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (period, amplitude, phase)
        })
        .collect();
    (0..length)
        .map(|t| {
            offset
                + waves
                    .iter()
                    .map(|&(period, amp, phase)| {
                        amp * (std::f64::consts::TAU * t as f64 / period + phase).sin()
                    })
                    .sum::<f64>()
        })
        .collect()
}

/// Generates the output series `u` (id `"u"`) with channels `"p1"`, `"p2"`, …
pub fn synth_arx(cfg: &SynthArx) -> Result<MultiSeriesDataset> {
    if cfg.length == 0 {
        return Err(Error::InvalidArgument(
            "synthetic length must be positive".into(),
        ));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sd {} must be ≥ 0",
            cfg.noise_sd
        )));
    }
    let radius = companion_spectral_radius(&cfg.coeffs_u);
    if radius >= 1.0 && !cfg.allow_unstable {
        return Err(Error::UnstableSystem {
            spectral_radius: radius,
        });
    }
    let signals = match &cfg.exogenous {
        Some(s) => {
            if s.len() != cfg.coeffs_p.len() {
                return Err(Error::LengthMismatch {
                    expected: cfg.coeffs_p.len(),
                    found: s.len(),
                });
            }
            if let Some(bad) = s.iter().find(|x| x.len() != cfg.length) {
                return Err(Error::LengthMismatch {
                    expected: cfg.length,
                    found: bad.len(),
                });
            }
            s.clone()
        }
        None => (0..cfg.coeffs_p.len())
            .map(|c| smooth_signal(cfg.length, rng::derive_seed(cfg.seed, c as u64 + 1)))
            .collect(),
    };

    let normal =
        Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut noise_rng = rng::seeded(rng::derive_seed(cfg.seed, 0));
    let mut u = vec![0.0; cfg.length];
    for t in 0..cfg.length {
        let mut v = cfg.initial.get(t).copied().unwrap_or(0.0);
        for (j, &a) in cfg.coeffs_u.iter().enumerate() {
            if let Some(past) = t.checked_sub(j + 1) {
                v += a * u[past];
            }
        }
        for (c, coeffs) in cfg.coeffs_p.iter().enumerate() {
            for (j, &b) in coeffs.iter().enumerate() {
                if let Some(past) = t.checked_sub(j + 1) {
                    v += b * signals[c][past];
                }
            }
        }
        if cfg.noise_sd > 0.0 {
            v += normal.sample(&mut noise_rng);
        }
        u[t] = v;
    }

    let output = TimeSeries::hourly("u", u)?;
    let exogenous = signals
        .into_iter()
        .enumerate()
        .map(|(c, s)| TimeSeries::hourly(format!("p{}", c + 1), s))
        .collect::<Result<Vec<_>>>()?;
    MultiSeriesDataset::new(output, exogenous)
}

/// Daily traffic shape of template `kind` at fractional hour `h`:
/// 0 = single broad midday crest (weekend-like), 1 = commuter double crest
/// with equal peaks, 2 = tidal double crest with a dominant morning peak.
/// The three shapes are roughly equidistant under squared-difference DTW.
fn template_shape(kind: usize, h: f64) -> f64 {
    let bump = |centre: f64, width: f64| {
        // distance on the 24-hour circle
        let d = (h - centre).rem_euclid(24.0);
        let d = d.min(24.0 - d);
        (-(d / width).powi(2)).exp()
    };
    0.2 + match kind {
        0 => 0.7 * bump(14.0, 4.0),
        1 => bump(8.0, 1.5) + bump(18.0, 1.5),
        _ => 1.5 * bump(7.5, 2.0) + 0.25 * bump(18.0, 1.5),
    }
}

/// Labelled corpus of `per_template` noisy copies of each of the three daily
/// traffic templates, with random amplitude (±10%) and phase (±1 h).
/// Returns the series (ids `t<kind>_<copy>`) and their template labels.
pub fn synth_template_corpus(
    per_template: usize,
    length: usize,
    noise_sd: f64,
    seed: u64,
) -> (Vec<TimeSeries>, Vec<usize>) {
    let mut rng = rng::seeded(seed);
    let normal = Normal::new(0.0, noise_sd.max(0.0)).expect("finite sd");
    let mut series = Vec::with_capacity(3 * per_template);
    let mut labels = Vec::with_capacity(3 * per_template);
    for kind in 0..3 {
        for copy in 0..per_template {
            let amplitude = rng.random_range(0.9..1.1);
            let shift = rng.random_range(-1.0..1.0);
            let values = (0..length)
                .map(|t| {
                    amplitude * template_shape(kind, t as f64 + shift) + normal.sample(&mut rng)
                })
                .collect();
            series.push(
                TimeSeries::hourly(format!("t{kind}_{copy}"), values).expect("finite samples"),
            );
            labels.push(kind);
        }
    }
    (series, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_recursion() {
        let d = synth_arx(&SynthArx::new(vec![0.5], vec![], 5, 0).initial(vec![1.0])).unwrap();
        assert_eq!(d.output().values(), &[1.0, 0.5, 0.25, 0.125, 0.0625]);
    }

    #[test]
    fn exogenous_pass_through() {
        let d = synth_arx(&SynthArx::new(vec![], vec![vec![1.0]], 50, 3)).unwrap();
        let u = d.output().values();
        let p = d.exogenous()[0].values();
        for t in 1..50 {
            assert_eq!(u[t], p[t - 1]);
        }
    }

    #[test]
    fn unstable_needs_override() {
        let cfg = SynthArx::new(vec![1.1], vec![], 40, 0).initial(vec![1.0]);
        assert!(matches!(synth_arx(&cfg), Err(Error::UnstableSystem { .. })));
        let d = synth_arx(&cfg.allow_unstable()).unwrap();
        let u = d.output().values();
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        assert!(u[39] > 40.0);
    }

    #[test]
    fn spectral_radius_of_known_polynomials() {
        assert!((companion_spectral_radius(&[0.5]) - 0.5).abs() < 1e-12);
        // roots of z^2 - 1.5z + 0.56 are 0.8 and 0.7
        assert!((companion_spectral_radius(&[1.5, -0.56]) - 0.8).abs() < 1e-10);
        // z^2 + 0.81 has roots ±0.9i
        assert!((companion_spectral_radius(&[0.0, -0.81]) - 0.9).abs() < 1e-10);
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = SynthArx::new(vec![0.3], vec![vec![0.5, 0.2]], 100, 9).noise(0.1);
        assert_eq!(synth_arx(&cfg).unwrap(), synth_arx(&cfg).unwrap());
        let other = SynthArx { seed: 10, ..cfg };
        assert_ne!(
            synth_arx(&other).unwrap().output(),
            synth_arx(&SynthArx {
                seed: 9,
                ..other.clone()
            })
            .unwrap()
            .output()
        );
    }

    #[test]
    fn independent_recursion_agrees() {
        let coeffs_u = [0.6, -0.2, 0.1];
        let coeffs_p = [vec![0.8, 0.0, -0.3], vec![0.25]];
        let d = synth_arx(
            &SynthArx::new(coeffs_u.to_vec(), coeffs_p.to_vec(), 300, 5).initial(vec![1.0, -1.0]),
        )
        .unwrap();
        let u = d.output().values();
        let p1 = d.exogenous()[0].values();
        let p2 = d.exogenous()[1].values();
        for t in 3..300 {
            let want = 0.6 * u[t - 1] - 0.2 * u[t - 2] + 0.1 * u[t - 3] + 0.8 * p1[t - 1]
                - 0.3 * p1[t - 3]
                + 0.25 * p2[t - 1];
            assert!((u[t] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }
}
