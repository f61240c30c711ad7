//! Experiment configuration: the bundled defaults overlaid with a user TOML
//! file, then checked against the schema below. Unknown keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};

use arxflow_core::linreg::{LarsKeep, LassoOptions, Method};
use arxflow_core::neural::{Activation, AdamConfig, LmConfig};
use arxflow_core::SplitSpec;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULTS: &str = include_str!("../defaults.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output subdirectory; the config file stem when absent.
    pub name: Option<String>,
    pub seed: u64,
    pub timing: bool,
    pub dataset: DatasetConfig,
    pub lags: LagsConfig,
    pub split: SplitConfig,
    pub linear: LinearConfig,
    pub srnn: SrnnConfig,
    pub lstm: LstmConfig,
    pub lm: LmSection,
    pub adam: AdamSection,
    pub matrix: MatrixConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Dataset cache files, relative to the config file. Each is evaluated
    /// separately and report rows are the mean over them.
    #[serde(default)]
    pub caches: Vec<PathBuf>,
    pub synthetic: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub coeffs_u: Vec<f64>,
    #[serde(default)]
    pub coeffs_p: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise_sd: f64,
    pub length: usize,
    #[serde(default = "one")]
    pub series: usize,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagsConfig {
    pub td: usize,
    pub include_current_p: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub folds: usize,
}

impl SplitConfig {
    /// With `validation`, the configured fractions; otherwise the validation
    /// share goes to training and there is one fold.
    pub fn spec(&self, validation: bool, seed: u64) -> Result<SplitSpec, CliError> {
        let spec = if validation {
            SplitSpec::new(self.train, self.val, self.test, self.folds, seed)
        } else {
            SplitSpec::new(self.train + self.val, 0.0, self.test, 1, seed)
        };
        spec.map_err(CliError::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum KeepSetting {
    Named(KeepName),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepName {
    Auto,
    All,
}

impl KeepSetting {
    pub fn lars_keep(self) -> LarsKeep {
        match self {
            KeepSetting::Named(KeepName::Auto) => LarsKeep::Auto,
            KeepSetting::Named(KeepName::All) => LarsKeep::All,
            KeepSetting::Count(k) => LarsKeep::Count(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub ridge_lambda: f64,
    pub lasso_lambda: f64,
    pub lars_keep: KeepSetting,
    pub one_se: bool,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
}

impl LinearConfig {
    pub fn lasso_options(&self) -> LassoOptions {
        LassoOptions {
            tol: self.lasso_tol,
            max_iter: self.lasso_max_iter,
        }
    }

    pub fn default_lambda(&self, method: Method) -> f64 {
        match method {
            Method::Ols => 0.0,
            Method::Ridge => self.ridge_lambda,
            Method::Lasso => self.lasso_lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrnnConfig {
    pub hidden: usize,
    pub activation: ActivationName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Tanh,
    Identity,
}

impl From<ActivationName> for Activation {
    fn from(a: ActivationName) -> Self {
        match a {
            ActivationName::Tanh => Activation::Tanh,
            ActivationName::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSection {
    pub max_epochs: usize,
    pub min_gradient: f64,
    pub mu_init: f64,
    pub mu_decrease: f64,
    pub mu_increase: f64,
    pub mu_max: f64,
}

impl From<LmSection> for LmConfig {
    fn from(s: LmSection) -> Self {
        LmConfig {
            max_epochs: s.max_epochs,
            min_gradient: s.min_gradient,
            mu_init: s.mu_init,
            mu_decrease: s.mu_decrease,
            mu_increase: s.mu_increase,
            mu_max: s.mu_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamSection {
    pub max_epochs: usize,
    pub grad_clip_norm: f64,
    pub lr_init: f64,
    pub lr_drop_period: usize,
    pub lr_drop_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_frequency: usize,
}

impl From<AdamSection> for AdamConfig {
    fn from(s: AdamSection) -> Self {
        AdamConfig {
            max_epochs: s.max_epochs,
            grad_clip_norm: s.grad_clip_norm,
            lr_init: s.lr_init,
            lr_drop_period: s.lr_drop_period,
            lr_drop_factor: s.lr_drop_factor,
            beta1: s.beta1,
            beta2: s.beta2,
            epsilon: s.epsilon,
            validation_frequency: s.validation_frequency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Lagged features with a bias column.
    Linear,
    /// Lagged features, their squares and a bias column.
    Poly,
    Srnn,
    Lstm,
}

impl Family {
    pub fn is_neural(self) -> bool {
        matches!(self, Family::Srnn | Family::Lstm)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Poly => "poly",
            Family::Srnn => "srnn",
            Family::Lstm => "lstm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub family: Family,
    pub rows: Vec<RowEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RowEntry {
    Label(String),
    Detailed(DetailedRow),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetailedRow {
    pub label: String,
    /// Fixed penalty overriding the family default.
    pub lambda: Option<f64>,
}

impl RowEntry {
    fn parts(&self) -> (&str, Option<f64>) {
        match self {
            RowEntry::Label(l) => (l, None),
            RowEntry::Detailed(d) => (&d.label, d.lambda),
        }
    }
}

/// One matrix row after label parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub exogenous: bool,
    /// Rows marked V use a validation split.
    pub validation: bool,
    pub kind: RowKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKind {
    Linear {
        method: Method,
        lambda: f64,
        cv: bool,
    },
    Neural {
        td: usize,
    },
}

/// Parses a table row label. Linear families take `AR|ARX <OLS|RR|Lasso> [V]`
/// where V selects λ by cross-validation; neural families take
/// `AR|ARX [td] [V]` where V enables validation-based early stopping.
pub fn parse_row(
    entry: &RowEntry,
    family: Family,
    linear: &LinearConfig,
    default_td: usize,
) -> Result<Row, CliError> {
    let (label, lambda) = entry.parts();
    let bad = |why: &str| CliError::Config(format!("row {label:?}: {why}"));
    let mut tokens: Vec<&str> = label.split_whitespace().collect();
    let exogenous = match tokens.first().copied() {
        Some("AR") => false,
        Some("ARX") => true,
        _ => return Err(bad("must start with AR or ARX")),
    };
    tokens.remove(0);
    let validation = tokens.last() == Some(&"V");
    if validation {
        tokens.pop();
    }
    let kind = if family.is_neural() {
        if lambda.is_some() {
            return Err(bad("λ applies only to linear families"));
        }
        let td = match tokens[..] {
            [] => default_td,
            [n] => n.parse().map_err(|_| bad("expected a delay count"))?,
            _ => return Err(bad("expected `AR|ARX [td] [V]`")),
        };
        if td == 0 {
            return Err(bad("delay must be positive"));
        }
        RowKind::Neural { td }
    } else {
        let method: Method = match tokens[..] {
            [m] => m.parse().map_err(|_| bad("unknown calibrator"))?,
            _ => return Err(bad("expected `AR|ARX OLS|RR|Lasso [V]`")),
        };
        if method == Method::Ols && (validation || lambda.is_some()) {
            return Err(bad("OLS has no λ"));
        }
        if validation && lambda.is_some() {
            return Err(bad("λ and cross-validation are mutually exclusive"));
        }
        let lambda = lambda.unwrap_or_else(|| linear.default_lambda(method));
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(bad("λ must be finite and ≥ 0"));
        }
        RowKind::Linear {
            method,
            lambda,
            cv: validation,
        }
    };
    Ok(Row {
        label: label.split_whitespace().collect::<Vec<_>>().join(" "),
        exogenous,
        validation,
        kind,
    })
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn flatten(message: impl fmt::Display) -> String {
    message
        .to_string()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl ExperimentConfig {
    /// Defaults overlaid with `text`; relative dataset paths resolve against
    /// `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(DEFAULTS).expect("bundled defaults parse");
        let user: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(flatten(e)))?;
        merge(&mut table, user);
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(flatten(e)))?;
        for p in &mut cfg.dataset.caches {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))?;
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.dataset.caches[..], &self.dataset.synthetic) {
            ([], None) => return bad("dataset needs `caches` or a `synthetic` section".into()),
            ([_, ..], Some(_)) => {
                return bad("dataset takes either `caches` or `synthetic`, not both".into())
            }
            (_, Some(s)) if s.series == 0 => return bad("synthetic.series must be positive".into()),
            _ => {}
        }
        if self.matrix.rows.is_empty() {
            return bad("matrix.rows is empty".into());
        }
        if self.lags.td == 0 {
            return bad("lags.td must be positive".into());
        }
        self.split.spec(true, 0)?;
        self.split.spec(false, 0)?;
        if self.srnn.hidden == 0 || self.lstm.hidden == 0 {
            return bad("hidden sizes must be positive".into());
        }
        LmConfig::from(self.lm).validate()?;
        AdamConfig::from(self.adam).validate()?;
        self.rows()?;
        Ok(())
    }

    pub fn rows(&self) -> Result<Vec<Row>, CliError> {
        self.matrix
            .rows
            .iter()
            .map(|r| parse_row(r, self.matrix.family, &self.linear, self.lags.td))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dataset.synthetic]
        coeffs_u = [0.5]
        coeffs_p = [[0.0, 1.0]]
        length = 200

        [matrix]
        family = "linear"
        rows = ["AR OLS", "ARX RR V", { label = "ARX Lasso", lambda = 0.5 }]
    "#;

    fn load(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_toml(text, Path::new("."))
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = load(MINIMAL).unwrap();
        assert_eq!(cfg.linear.ridge_lambda, 1e4);
        assert_eq!(cfg.linear.lasso_lambda, 10.0);
        assert_eq!(cfg.lm.mu_init, 0.001);
        assert_eq!(cfg.adam.lr_drop_period, 800);
        assert_eq!(cfg.lags.td, 4);
        let rows = cfg.rows().unwrap();
        assert_eq!(
            rows[1].kind,
            RowKind::Linear {
                method: Method::Ridge,
                lambda: 1e4,
                cv: true
            }
        );
        assert_eq!(
            rows[2].kind,
            RowKind::Linear {
                method: Method::Lasso,
                lambda: 0.5,
                cv: false
            }
        );
        assert!(!rows[0].exogenous && rows[1].exogenous);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load(&format!("{MINIMAL}\n[lm]\nmu_inti = 0.1\n")).unwrap_err();
        assert!(err.to_string().contains("mu_inti"), "{err}");
        let err = load(&format!("seeed = 1\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("seeed"), "{err}");
    }

    #[test]
    fn empty_matrix_is_invalid() {
        let text = MINIMAL.replace(
            r#"rows = ["AR OLS", "ARX RR V", { label = "ARX Lasso", lambda = 0.5 }]"#,
            "rows = []",
        );
        assert!(matches!(load(&text), Err(CliError::Config(m)) if m.contains("empty")));
    }

    #[test]
    fn neural_labels_carry_the_delay() {
        let e = |s: &str| RowEntry::Label(s.into());
        let lin = load(MINIMAL).unwrap().linear;
        let r = parse_row(&e("ARX 2 V"), Family::Srnn, &lin, 4).unwrap();
        assert_eq!(r.kind, RowKind::Neural { td: 2 });
        assert!(r.validation && r.exogenous);
        let r = parse_row(&e("AR"), Family::Lstm, &lin, 4).unwrap();
        assert_eq!(r.kind, RowKind::Neural { td: 4 });
        assert!(!r.validation);
    }

    #[test]
    fn contradictory_rows_are_rejected() {
        let lin = load(MINIMAL).unwrap().linear;
        let d = |l: &str, lambda| {
            RowEntry::Detailed(DetailedRow {
                label: l.into(),
                lambda: Some(lambda),
            })
        };
        assert!(parse_row(&d("AR RR V", 1.0), Family::Linear, &lin, 4).is_err());
        assert!(parse_row(&d("AR OLS", 1.0), Family::Linear, &lin, 4).is_err());
        assert!(parse_row(&RowEntry::Label("AR OLS V".into()), Family::Linear, &lin, 4).is_err());
        assert!(parse_row(&RowEntry::Label("XR OLS".into()), Family::Linear, &lin, 4).is_err());
        assert!(parse_row(&RowEntry::Label("ARX 0".into()), Family::Srnn, &lin, 4).is_err());
    }
}
