//! Linear and polynomial ARX identification: LARS structure selection
//! followed by OLS, ridge or lasso calibration.
//!
//! Every fit works on the columns of a [`RegressionProblem`] as given
//! (normally standardised) and reports coefficients in the original units of
//! the features, so a [`LinearModel`] predicts directly from raw lagged
//! values.

mod lars;
mod pipeline;
mod solve;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub use lars::{lars_path, LarsPath, LarsStep};
pub use pipeline::{fit_pipeline, CvReport, CvSpec, LarsKeep, PipelineOptions};
pub use solve::{lambda_max, lasso_fit, lasso_fit_with, ols_fit, ridge_fit, LassoOptions};

use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::features::{FeatureTerm, RegressionProblem, Scaling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ols,
    Ridge,
    Lasso,
}

impl Method {
    /// Objective the fitted `lambda` refers to.
    pub fn convention(self) -> &'static str {
        match self {
            Method::Ols => "||y-Xb||^2",
            Method::Ridge => "||y-Xb||^2+lambda*||b||_2^2;bias-unpenalized;standardized",
            Method::Lasso => "(1/2n)||y-Xb||^2+lambda*||b||_1;bias-unpenalized;standardized",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ols => "OLS",
            Method::Ridge => "Ridge",
            Method::Lasso => "Lasso",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Method::Ols),
            "ridge" | "rr" => Ok(Method::Ridge),
            "lasso" => Ok(Method::Lasso),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

/// A fitted linear predictor `ŷ(t) = Σ_j coefficients[j]·terms[j](t) + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub method: Method,
    pub lambda: f64,
    pub convention: String,
    pub terms: Vec<FeatureTerm>,
    /// Features kept by LARS, in the order they entered.
    pub selected: Vec<String>,
    /// Per-term coefficients in raw feature units; 0 for terms not selected.
    pub coefficients: Vec<f64>,
    /// Constant not carried by a bias column.
    pub intercept: f64,
    pub scaling: Scaling,
    pub channels: usize,
}

impl LinearModel {
    /// Builds a model from coefficients on the (scaled) columns of `problem`.
    pub(crate) fn from_scaled(
        problem: &RegressionProblem,
        beta: &[f64],
        selected: Vec<String>,
        method: Method,
        lambda: f64,
    ) -> Self {
        let (mut coefficients, offset) = problem.scaling.unscale_coefficients(beta);
        let intercept = match problem.bias_index() {
            Some(b) => {
                coefficients[b] += offset;
                0.0
            }
            None => offset,
        };
        LinearModel {
            method,
            lambda,
            convention: method.convention().to_string(),
            terms: problem.terms.clone(),
            selected,
            coefficients,
            intercept,
            scaling: problem.scaling.clone(),
            channels: problem.channels,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.terms.iter().map(ToString::to_string).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.terms
            .iter()
            .position(|t| t.to_string() == name)
            .map(|j| self.coefficients[j])
    }

    /// Predictions for the rows of `problem`, which must share the layout.
    pub fn predict_problem(&self, problem: &RegressionProblem) -> Result<Vec<f64>> {
        if problem.terms != self.terms {
            return Err(Error::LayoutMismatch(
                "problem columns differ from the model's terms".into(),
            ));
        }
        let raw = problem.raw_x();
        Ok(raw
            .row_iter()
            .map(|row| {
                row.iter()
                    .zip(&self.coefficients)
                    .map(|(x, c)| x * c)
                    .sum::<f64>()
                    + self.intercept
            })
            .collect())
    }

    /// Text form with every float at shortest round-trip precision.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# arxflow-linear 1")?;
        writeln!(out, "method = {}", self.method)?;
        writeln!(out, "lambda = {:?}", self.lambda)?;
        writeln!(out, "convention = {}", self.convention)?;
        writeln!(out, "intercept = {:?}", self.intercept)?;
        writeln!(out, "channels = {}", self.channels)?;
        writeln!(out, "selected = {}", self.selected.join(" "))?;
        writeln!(out, "term coefficient mean scale")?;
        for (j, term) in self.terms.iter().enumerate() {
            writeln!(
                out,
                "{} {:?} {:?} {:?}",
                term, self.coefficients[j], self.scaling.mean[j], self.scaling.scale[j]
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            what: "linear model",
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "# arxflow-linear 1")) => {}
            _ => return Err(err(1, "missing `# arxflow-linear 1` header".into())),
        }
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing `{key}`")))?;
            let value = line
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(" ="))
                .ok_or_else(|| err(n, format!("expected `{key} = …`")))?;
            Ok((n, value.trim().to_string()))
        };
        let float = |(n, v): (usize, String)| v.parse::<f64>().map_err(|e| err(n, e.to_string()));
        let (n, m) = header("method")?;
        let method: Method = m.parse().map_err(|e: Error| err(n, e.to_string()))?;
        let lambda = float(header("lambda")?)?;
        let convention = header("convention")?.1;
        let intercept = float(header("intercept")?)?;
        let (n, c) = header("channels")?;
        let channels = c
            .parse()
            .map_err(|_| err(n, format!("bad channel count {c:?}")))?;
        let selected = header("selected")?
            .1
            .split_whitespace()
            .map(String::from)
            .collect();
        match lines.next() {
            Some((_, "term coefficient mean scale")) => {}
            other => {
                return Err(err(
                    other.map_or(0, |(n, _)| n),
                    "missing column header".into(),
                ))
            }
        }
        let mut terms = Vec::new();
        let mut coefficients = Vec::new();
        let mut scaling = Scaling::identity(0);
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(err(n, format!("expected 4 fields, found {}", f.len())));
            }
            terms.push(
                f[0].parse::<FeatureTerm>()
                    .map_err(|e| err(n, e.to_string()))?,
            );
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(n, e.to_string()));
            coefficients.push(num(f[1])?);
            scaling.mean.push(num(f[2])?);
            scaling.scale.push(num(f[3])?);
        }
        Ok(LinearModel {
            method,
            lambda,
            convention,
            terms,
            selected,
            coefficients,
            intercept,
            scaling,
            channels,
        })
    }
}

impl Predictor for LinearModel {
    type State = ();

    fn max_lag(&self) -> usize {
        self.terms
            .iter()
            .map(FeatureTerm::max_lag)
            .max()
            .unwrap_or(0)
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn init_state(&self) {}

    fn step(&self, _: &mut (), t: usize, output: &[f64], exogenous: &[&[f64]]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &c)| c != 0.0)
            .map(|(term, c)| c * term.value(t, output, exogenous))
            .sum::<f64>()
            + self.intercept
    }
}
