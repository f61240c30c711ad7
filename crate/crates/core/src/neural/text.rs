//! Line-oriented model files: `key = value` headers followed by matrices
//! written as `name rows cols` and one row per line.

use std::io::Write;

use super::IoLayout;
use crate::error::{Error, Result};
use crate::features::{FeatureTerm, Scaling};

fn floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(super) fn write_layout<W: Write>(out: &mut W, layout: &IoLayout) -> Result<()> {
    let names: Vec<String> = layout.terms.iter().map(ToString::to_string).collect();
    writeln!(out, "inputs = {}", names.join(" "))?;
    writeln!(out, "channels = {}", layout.channels)?;
    writeln!(out, "input_mean = {}", floats(&layout.input.mean))?;
    writeln!(out, "input_scale = {}", floats(&layout.input.scale))?;
    writeln!(
        out,
        "output = {:?} {:?}",
        layout.output_mean, layout.output_scale
    )?;
    Ok(())
}

pub(super) fn write_matrix<W: Write>(
    out: &mut W,
    name: &str,
    rows: usize,
    cols: usize,
    row_major: &[f64],
) -> Result<()> {
    writeln!(out, "{name} {rows} {cols}")?;
    for r in 0..rows {
        writeln!(out, "{}", floats(&row_major[r * cols..(r + 1) * cols]))?;
    }
    Ok(())
}

pub(super) struct Reader<'a> {
    what: &'static str,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    pub(super) fn new(what: &'static str, text: &'a str) -> Self {
        Reader {
            what,
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    pub(super) fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            what: self.what,
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.error("unexpected end of file")),
        }
    }

    pub(super) fn expect(&mut self, exact: &str) -> Result<()> {
        let l = self.next_line()?;
        if l == exact {
            Ok(())
        } else {
            Err(self.error(format!("expected {exact:?}")))
        }
    }

    pub(super) fn value(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next_line()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(" ="))
            .map(str::trim)
            .ok_or_else(|| self.error(format!("expected `{key} = …`")))
    }

    pub(super) fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.value(key)?;
        v.parse()
            .map_err(|_| self.error(format!("bad value {v:?} for {key}")))
    }

    fn float_list(&self, s: &str) -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| self.error(format!("{v:?}: {e}")))
            })
            .collect()
    }

    pub(super) fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        let v = self.value(key)?;
        self.float_list(v)
    }

    pub(super) fn layout(&mut self) -> Result<IoLayout> {
        let names = self.value("inputs")?;
        let terms = names
            .split_whitespace()
            .map(|n| {
                n.parse::<FeatureTerm>()
                    .map_err(|e| self.error(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let channels = self.parse("channels")?;
        let mean = self.floats("input_mean")?;
        let scale = self.floats("input_scale")?;
        if mean.len() != terms.len() || scale.len() != terms.len() {
            return Err(self.error("scaling length differs from the input count"));
        }
        let out = self.floats("output")?;
        let [output_mean, output_scale] = out[..] else {
            return Err(self.error("expected output mean and scale"));
        };
        Ok(IoLayout {
            terms,
            channels,
            input: Scaling { mean, scale },
            output_mean,
            output_scale,
        })
    }

    /// A matrix block with the given name and shape, row-major.
    pub(super) fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let head = self.next_line()?;
        if head != format!("{name} {rows} {cols}") {
            return Err(self.error(format!("expected `{name} {rows} {cols}`")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let l = self.next_line()?;
            let row = self.float_list(l)?;
            if row.len() != cols {
                return Err(self.error(format!("expected {cols} values, found {}", row.len())));
            }
            data.extend(row);
        }
        Ok(data)
    }

    pub(super) fn finish(&mut self) -> Result<()> {
        match self.lines.find(|(_, l)| !l.trim().is_empty()) {
            None => Ok(()),
            Some((i, _)) => {
                self.line = i + 1;
                Err(self.error("trailing content"))
            }
        }
    }
}
