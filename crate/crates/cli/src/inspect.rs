use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use arxflow_core::ingest::read_cache;
use arxflow_core::linreg::LinearModel;
use arxflow_core::neural::{LstmModel, SrnnModel};

use crate::CliError;

fn stats(v: &[f64]) -> (f64, f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, sd, min, max)
}

/// Human-readable summary of a dataset cache or a model file, recognised by
/// its first line.
pub fn inspect_text(text: &str) -> Result<String, CliError> {
    let mut out = String::new();
    match text.lines().next().unwrap_or_default() {
        "# arxflow-dataset 1" => {
            let data = read_cache(text.as_bytes())?;
            let u = data.output();
            writeln!(
                out,
                "dataset: {} series × {} samples, t0 = {}, dt = {} h",
                data.channel_count() + 1,
                data.len(),
                u.t0(),
                u.dt()
            )
            .unwrap();
            writeln!(
                out,
                "{:<16} {:>12} {:>12} {:>12} {:>12}",
                "series", "mean", "sd", "min", "max"
            )
            .unwrap();
            for (i, s) in data.all_series().enumerate() {
                let (mean, sd, min, max) = stats(s.values());
                let id = if i == 0 {
                    format!("{} (output)", s.id())
                } else {
                    s.id().to_string()
                };
                writeln!(
                    out,
                    "{id:<16} {mean:>12.4} {sd:>12.4} {min:>12.4} {max:>12.4}"
                )
                .unwrap();
            }
        }
        "# arxflow-linear 1" => {
            let m = LinearModel::from_text(text)?;
            writeln!(
                out,
                "linear model: {} (λ = {}, {})",
                m.method, m.lambda, m.convention
            )
            .unwrap();
            writeln!(
                out,
                "channels: {}, terms: {}, selected: {}",
                m.channels,
                m.terms.len(),
                m.selected.len()
            )
            .unwrap();
            for (t, c) in m.terms.iter().zip(&m.coefficients) {
                if *c != 0.0 {
                    writeln!(out, "  {:<14} {c:+.6e}", t.to_string()).unwrap();
                }
            }
            if m.intercept != 0.0 {
                writeln!(out, "  {:<14} {:+.6e}", "intercept", m.intercept).unwrap();
            }
        }
        "# arxflow-srnn 1" => {
            let m = SrnnModel::from_text(text)?;
            writeln!(
                out,
                "srnn: {} inputs, {} hidden ({}), {} parameters, max lag {}",
                m.layout.n_inputs(),
                m.hidden,
                m.activation,
                m.n_params(),
                m.layout.max_lag()
            )
            .unwrap();
        }
        "# arxflow-lstm 1" => {
            let m = LstmModel::from_text(text)?;
            writeln!(
                out,
                "lstm: {} inputs, {} hidden, {} parameters, max lag {}",
                m.layout.n_inputs(),
                m.hidden,
                m.n_params(),
                m.layout.max_lag()
            )
            .unwrap();
        }
        other => {
            return Err(CliError::Config(format!(
                "unrecognised file header {other:?}"
            )))
        }
    }
    Ok(out)
}

pub fn cmd_inspect(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    inspect_text(&text).map_err(|e| CliError::Context(path.display().to_string(), Box::new(e)))
}
