use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A lagged signal: `u(t − lag)` or `p_channel(t − lag)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lagged {
    Output {
        lag: usize,
    },
    /// `channel` is 0-based; it is displayed 1-based (`p1`, `p2`, …).
    Exogenous {
        channel: usize,
        lag: usize,
    },
}

impl Lagged {
    #[inline]
    pub fn value(self, t: usize, output: &[f64], exogenous: &[&[f64]]) -> f64 {
        match self {
            Lagged::Output { lag } => output[t - lag],
            Lagged::Exogenous { channel, lag } => exogenous[channel][t - lag],
        }
    }

    pub fn lag(self) -> usize {
        match self {
            Lagged::Output { lag } | Lagged::Exogenous { lag, .. } => lag,
        }
    }
}

impl fmt::Display for Lagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, lag) = match *self {
            Lagged::Output { lag } => ("u".to_string(), lag),
            Lagged::Exogenous { channel, lag } => (format!("p{}", channel + 1), lag),
        };
        if lag == 0 {
            write!(f, "{name}[t]")
        } else {
            write!(f, "{name}[t-{lag}]")
        }
    }
}

/// One regression column: the constant, or a product of powers of lagged
/// signals (`u[t-1]`, `p2[t]^2`, `p1[t]*u[t-2]`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FeatureTerm {
    Bias,
    /// Factors sorted by signal, each with power ≥ 1.
    Product(Vec<(Lagged, u32)>),
}

impl FeatureTerm {
    pub fn linear(signal: Lagged) -> Self {
        FeatureTerm::Product(vec![(signal, 1)])
    }

    pub fn is_bias(&self) -> bool {
        matches!(self, FeatureTerm::Bias)
    }

    /// Product of two terms with powers merged.
    pub fn times(&self, other: &FeatureTerm) -> FeatureTerm {
        match (self, other) {
            (FeatureTerm::Bias, t) | (t, FeatureTerm::Bias) => t.clone(),
            (FeatureTerm::Product(a), FeatureTerm::Product(b)) => {
                let mut factors = a.clone();
                for &(signal, power) in b {
                    match factors.iter_mut().find(|(s, _)| *s == signal) {
                        Some((_, p)) => *p += power,
                        None => factors.push((signal, power)),
                    }
                }
                factors.sort();
                FeatureTerm::Product(factors)
            }
        }
    }

    #[inline]
    pub fn value(&self, t: usize, output: &[f64], exogenous: &[&[f64]]) -> f64 {
        match self {
            FeatureTerm::Bias => 1.0,
            FeatureTerm::Product(factors) => factors
                .iter()
                .map(|&(s, p)| s.value(t, output, exogenous).powi(p as i32))
                .product(),
        }
    }

    pub fn max_lag(&self) -> usize {
        match self {
            FeatureTerm::Bias => 0,
            FeatureTerm::Product(f) => f.iter().map(|(s, _)| s.lag()).max().unwrap_or(0),
        }
    }

    pub fn uses_output(&self) -> bool {
        matches!(self, FeatureTerm::Product(f) if f.iter().any(|(s, _)| matches!(s, Lagged::Output { .. })))
    }

    pub fn max_channel(&self) -> Option<usize> {
        match self {
            FeatureTerm::Bias => None,
            FeatureTerm::Product(f) => f
                .iter()
                .filter_map(|(s, _)| match s {
                    Lagged::Exogenous { channel, .. } => Some(*channel),
                    Lagged::Output { .. } => None,
                })
                .max(),
        }
    }
}

impl fmt::Display for FeatureTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureTerm::Bias => f.write_str("bias"),
            FeatureTerm::Product(factors) => {
                for (i, (signal, power)) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{signal}")?;
                    if *power > 1 {
                        write!(f, "^{power}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn bad_name(s: &str) -> Error {
    Error::Parse {
        what: "feature name",
        line: 0,
        message: format!("cannot parse {s:?}"),
    }
}

fn parse_lagged(s: &str) -> Result<Lagged> {
    let (name, rest) = s.split_once('[').ok_or_else(|| bad_name(s))?;
    let inner = rest.strip_suffix(']').ok_or_else(|| bad_name(s))?;
    let lag = match inner {
        "t" => 0,
        _ => inner
            .strip_prefix("t-")
            .and_then(|l| l.parse().ok())
            .filter(|&l| l > 0)
            .ok_or_else(|| bad_name(s))?,
    };
    if name == "u" {
        if lag == 0 {
            return Err(bad_name(s));
        }
        return Ok(Lagged::Output { lag });
    }
    let channel: usize = name
        .strip_prefix('p')
        .and_then(|c| c.parse().ok())
        .filter(|&c| c > 0)
        .ok_or_else(|| bad_name(s))?;
    Ok(Lagged::Exogenous {
        channel: channel - 1,
        lag,
    })
}

impl FromStr for FeatureTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bias" {
            return Ok(FeatureTerm::Bias);
        }
        let mut factors: Vec<(Lagged, u32)> = Vec::new();
        for part in s.split('*') {
            let (signal, power) = match part.split_once('^') {
                Some((sig, p)) => (
                    sig,
                    p.parse()
                        .ok()
                        .filter(|&p| p > 0)
                        .ok_or_else(|| bad_name(s))?,
                ),
                None => (part, 1),
            };
            factors.push((parse_lagged(signal)?, power));
        }
        let mut term = FeatureTerm::Product(Vec::new());
        for f in factors {
            term = term.times(&FeatureTerm::Product(vec![f]));
        }
        Ok(term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in [
            "bias",
            "u[t-2]",
            "p3[t-1]^2",
            "p1[t]",
            "u[t-1]*p1[t]",
            "p2[t-4]^3",
        ] {
            let term: FeatureTerm = name.parse().unwrap();
            let again: FeatureTerm = term.to_string().parse().unwrap();
            assert_eq!(term, again);
        }
        assert_eq!(
            "p3[t-1]^2".parse::<FeatureTerm>().unwrap().to_string(),
            "p3[t-1]^2"
        );
    }

    #[test]
    fn rejects_malformed_names() {
        for name in ["", "u[t]", "x[t-1]", "p0[t]", "u[t-0]", "u[t-1]^0", "u[t-1"] {
            assert!(name.parse::<FeatureTerm>().is_err(), "{name}");
        }
    }

    #[test]
    fn products_merge_powers() {
        let a = FeatureTerm::linear(Lagged::Output { lag: 1 });
        assert_eq!(a.times(&a).to_string(), "u[t-1]^2");
        assert_eq!(a.times(&FeatureTerm::Bias), a);
        let u = [1.0, 2.0, 3.0];
        let p = [10.0, 20.0, 30.0];
        let term: FeatureTerm = "u[t-1]^2*p1[t]".parse().unwrap();
        assert_eq!(term.value(2, &u, &[&p]), 4.0 * 30.0);
        assert_eq!(term.max_lag(), 1);
        assert!(term.uses_output());
        assert_eq!(term.max_channel(), Some(0));
    }
}
