use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalCost {
    #[default]
    SquaredDiff,
    AbsDiff,
}

impl LocalCost {
    #[inline]
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            LocalCost::SquaredDiff => (x - y) * (x - y),
            LocalCost::AbsDiff => (x - y).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DtwConfig {
    pub local_cost: LocalCost,
    /// Sakoe-Chiba band radius; `None` searches the full matrix.
    pub window: Option<usize>,
}

impl DtwConfig {
    pub fn with_window(window: usize) -> Self {
        DtwConfig {
            window: Some(window),
            ..Default::default()
        }
    }

    fn check(&self, len_a: usize, len_b: usize) -> Result<()> {
        if len_a == 0 || len_b == 0 {
            return Err(Error::EmptySeries);
        }
        if let Some(w) = self.window {
            if w == 0 {
                return Err(Error::InvalidArgument("warping window must be ≥ 1".into()));
            }
            if len_a.abs_diff(len_b) > w {
                return Err(Error::BandInfeasible {
                    len_a,
                    len_b,
                    window: w,
                });
            }
        }
        Ok(())
    }

    /// Columns `[lo, hi]` (1-based) of row `i` inside the band.
    #[inline]
    fn band(&self, i: usize, cols: usize) -> (usize, usize) {
        match self.window {
            None => (1, cols),
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(cols)),
        }
    }
}

pub fn dtw(a: &TimeSeries, b: &TimeSeries, cfg: &DtwConfig) -> Result<f64> {
    dtw_values(a.values(), b.values(), cfg)
}

/// Cumulative warping cost `γ(n, m)` with `γ(0, 0) = 0` and infinite
/// borders, keeping two rows over the shorter series.
pub fn dtw_values(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    cfg.check(a.len(), b.len())?;
    let (rows, cols) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let m = cols.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for (i, &x) in rows.iter().enumerate() {
        let i = i + 1;
        cur.fill(f64::INFINITY);
        let (lo, hi) = cfg.band(i, m);
        for j in lo..=hi {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = cfg.local_cost.eval(x, cols[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Cost and optimal warping path as 0-based `(index in a, index in b)` pairs
/// from `(0, 0)` to `(n-1, m-1)`. Uses the full `O(n·m)` matrix.
pub fn dtw_path(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<(f64, Vec<(usize, usize)>)> {
    cfg.check(a.len(), b.len())?;
    let (n, m) = (a.len(), b.len());
    let stride = m + 1;
    let mut g = vec![f64::INFINITY; (n + 1) * stride];
    g[0] = 0.0;
    for i in 1..=n {
        let (lo, hi) = cfg.band(i, m);
        for j in lo..=hi {
            let best = g[(i - 1) * stride + j - 1]
                .min(g[(i - 1) * stride + j])
                .min(g[i * stride + j - 1]);
            g[i * stride + j] = cfg.local_cost.eval(a[i - 1], b[j - 1]) + best;
        }
    }
    let cost = g[n * stride + m];
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        path.push((i - 1, j - 1));
        if i == 1 && j == 1 {
            break;
        }
        let diag = g[(i - 1) * stride + j - 1];
        let up = g[(i - 1) * stride + j];
        let left = g[i * stride + j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    Ok((cost, path))
}
