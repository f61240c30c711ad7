use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::text::{write_layout, write_matrix, Reader};
use super::{init_uniform, IoLayout, Sequence};
use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    /// Linear hidden units; used to check the recurrence against known
    /// linear systems.
    Identity,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the activation value.
    fn slope(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::InvalidArgument(format!("unknown activation {s:?}"))),
        }
    }
}

/// `h(t) = act(W_in·x(t) + W_rec·h(t−1) + b_h)`, `ŷ(t) = w_out·h(t) + b_out`,
/// `h` starting at zero.
///
/// Parameters live in one flat vector: `W_in` (row-major), `W_rec`
/// (row-major), `b_h`, `w_out`, `b_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrnnModel {
    pub layout: IoLayout,
    pub hidden: usize,
    pub activation: Activation,
    params: Vec<f64>,
}

impl SrnnModel {
    pub fn n_params_for(inputs: usize, hidden: usize) -> usize {
        hidden * inputs + hidden * hidden + 2 * hidden + 1
    }

    pub fn zeros(layout: IoLayout, hidden: usize, activation: Activation) -> Self {
        let n = Self::n_params_for(layout.n_inputs(), hidden);
        SrnnModel {
            layout,
            hidden,
            activation,
            params: vec![0.0; n],
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn new(layout: IoLayout, hidden: usize, activation: Activation, seed: u64) -> Self {
        let mut m = Self::zeros(layout, hidden, activation);
        let mut rng = seeded(seed);
        let fan = m.n_inputs() + hidden;
        let (a, b) = (m.off_w_rec(), m.off_b_h());
        init_uniform(&mut rng, &mut m.params[..a], fan);
        init_uniform(&mut rng, &mut m.params[a..b], fan);
        let (c, d) = (m.off_w_out(), m.off_b_out());
        init_uniform(&mut rng, &mut m.params[c..d], hidden);
        m
    }

    pub fn n_inputs(&self) -> usize {
        self.layout.n_inputs()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn off_w_rec(&self) -> usize {
        self.hidden * self.n_inputs()
    }
    fn off_b_h(&self) -> usize {
        self.off_w_rec() + self.hidden * self.hidden
    }
    fn off_w_out(&self) -> usize {
        self.off_b_h() + self.hidden
    }
    fn off_b_out(&self) -> usize {
        self.off_w_out() + self.hidden
    }

    pub fn w_in_mut(&mut self) -> &mut [f64] {
        let e = self.off_w_rec();
        &mut self.params[..e]
    }
    pub fn w_rec_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.off_w_rec(), self.off_b_h());
        &mut self.params[s..e]
    }
    pub fn b_h_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.off_b_h(), self.off_w_out());
        &mut self.params[s..e]
    }
    pub fn w_out_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.off_w_out(), self.off_b_out());
        &mut self.params[s..e]
    }
    pub fn b_out_mut(&mut self) -> &mut f64 {
        let s = self.off_b_out();
        &mut self.params[s]
    }

    fn check_inputs(&self, seq: &Sequence) -> Result<()> {
        if seq.n_inputs() != self.n_inputs() {
            return Err(Error::DimensionMismatch(format!(
                "network takes {} inputs, sequence has {}",
                self.n_inputs(),
                seq.n_inputs()
            )));
        }
        Ok(())
    }

    /// One recurrence step in scaled units; `h` is updated in place.
    fn cell(&self, h: &mut [f64], x: &[f64]) -> f64 {
        let (ni, nh) = (self.n_inputs(), self.hidden);
        let p = &self.params;
        let (w_rec, b_h, w_out) = (self.off_w_rec(), self.off_b_h(), self.off_w_out());
        let prev = h.to_vec();
        let mut y = p[self.off_b_out()];
        for i in 0..nh {
            let mut a = p[b_h + i];
            for k in 0..ni {
                a += p[i * ni + k] * x[k];
            }
            for k in 0..nh {
                a += p[w_rec + i * nh + k] * prev[k];
            }
            h[i] = self.activation.apply(a);
            y += p[w_out + i] * h[i];
        }
        y
    }

    /// Scaled predictions and the hidden trace (`T × H`, row-major).
    pub fn forward(&self, seq: &Sequence) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_inputs(seq)?;
        let nh = self.hidden;
        let mut h = vec![0.0; nh];
        let mut trace = Vec::with_capacity(seq.len() * nh);
        let mut pred = Vec::with_capacity(seq.len());
        for t in 0..seq.len() {
            let x: Vec<f64> = seq.inputs.column(t).iter().copied().collect();
            pred.push(self.cell(&mut h, &x));
            trace.extend_from_slice(&h);
        }
        Ok((pred, trace))
    }

    /// Loss `½ Σ_t w_t (ŷ_t − y_t)²` and its exact gradient by
    /// back-propagation through time; `weights` defaults to all ones.
    pub fn gradient(&self, seq: &Sequence, weights: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let (pred, trace) = self.forward(seq)?;
        let (ni, nh, n) = (self.n_inputs(), self.hidden, seq.len());
        let p = &self.params;
        let (o_rec, o_bh, o_out, o_bout) = (
            self.off_w_rec(),
            self.off_b_h(),
            self.off_w_out(),
            self.off_b_out(),
        );
        let mut g = vec![0.0; p.len()];
        let mut loss = 0.0;
        let mut da_next = vec![0.0; nh];
        for t in (0..n).rev() {
            let w = weights.map_or(1.0, |w| w[t]);
            let e = w * (pred[t] - seq.targets[t]);
            loss += 0.5 * w * (pred[t] - seq.targets[t]).powi(2);
            let h = &trace[t * nh..(t + 1) * nh];
            g[o_bout] += e;
            let mut da = vec![0.0; nh];
            for i in 0..nh {
                g[o_out + i] += e * h[i];
                let mut dh = e * p[o_out + i];
                for k in 0..nh {
                    dh += p[o_rec + k * nh + i] * da_next[k];
                }
                da[i] = dh * self.activation.slope(h[i]);
            }
            for i in 0..nh {
                g[o_bh + i] += da[i];
                for k in 0..ni {
                    g[i * ni + k] += da[i] * seq.inputs[(k, t)];
                }
                if t > 0 {
                    let hp = &trace[(t - 1) * nh..t * nh];
                    for k in 0..nh {
                        g[o_rec + i * nh + k] += da[i] * hp[k];
                    }
                }
            }
            da_next = da;
        }
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok((loss, g))
    }

    /// Residuals `ŷ_t − y_t` on `rows` (ascending) and their Jacobian with
    /// respect to the parameters, by forward-mode sensitivity propagation
    /// `S(t) = diag(act′)·(W_rec·S(t−1) + ∂a(t)/∂θ)`.
    pub fn jacobian(&self, seq: &Sequence, rows: &[usize]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check_inputs(seq)?;
        let (ni, nh, np) = (self.n_inputs(), self.hidden, self.n_params());
        let (o_rec, o_bh, o_out, o_bout) = (
            self.off_w_rec(),
            self.off_b_h(),
            self.off_w_out(),
            self.off_b_out(),
        );
        let w_rec = DMatrix::from_row_slice(nh, nh, &self.params[o_rec..o_bh]);
        let w_out = DVector::from_column_slice(&self.params[o_out..o_bout]);
        let mut s = DMatrix::<f64>::zeros(nh, np);
        let mut next = DMatrix::<f64>::zeros(nh, np);
        let mut h = vec![0.0; nh];
        let mut jac = DMatrix::<f64>::zeros(rows.len(), np);
        let mut res = Vec::with_capacity(rows.len());
        let mut r = 0;
        for t in 0..seq.len() {
            let prev = h.clone();
            let x: Vec<f64> = seq.inputs.column(t).iter().copied().collect();
            let y = self.cell(&mut h, &x);
            next.gemm(1.0, &w_rec, &s, 0.0);
            for i in 0..nh {
                for k in 0..ni {
                    next[(i, i * ni + k)] += x[k];
                }
                for k in 0..nh {
                    next[(i, o_rec + i * nh + k)] += prev[k];
                }
                next[(i, o_bh + i)] += 1.0;
                let slope = self.activation.slope(h[i]);
                next.row_mut(i).scale_mut(slope);
            }
            std::mem::swap(&mut s, &mut next);
            if r < rows.len() && rows[r] == t {
                let through_hidden = s.tr_mul(&w_out);
                let mut row = jac.row_mut(r);
                row.tr_copy_from(&through_hidden);
                for i in 0..nh {
                    row[o_out + i] = h[i];
                }
                row[o_bout] = 1.0;
                res.push(y - seq.targets[t]);
                r += 1;
            }
        }
        if r != rows.len() {
            return Err(Error::InvalidArgument(
                "Jacobian rows must be ascending and in range".into(),
            ));
        }
        if res.iter().any(|v| !v.is_finite()) || jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok((res, jac))
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_text(&mut out)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("model text is UTF-8")
    }

    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let (ni, nh) = (self.n_inputs(), self.hidden);
        writeln!(out, "# arxflow-srnn 1")?;
        writeln!(out, "hidden = {nh}")?;
        writeln!(out, "activation = {}", self.activation)?;
        write_layout(&mut out, &self.layout)?;
        let p = &self.params;
        write_matrix(&mut out, "W_in", nh, ni, &p[..self.off_w_rec()])?;
        write_matrix(
            &mut out,
            "W_rec",
            nh,
            nh,
            &p[self.off_w_rec()..self.off_b_h()],
        )?;
        write_matrix(&mut out, "b_h", 1, nh, &p[self.off_b_h()..self.off_w_out()])?;
        write_matrix(
            &mut out,
            "w_out",
            1,
            nh,
            &p[self.off_w_out()..self.off_b_out()],
        )?;
        write_matrix(&mut out, "b_out", 1, 1, &p[self.off_b_out()..])?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rd = Reader::new("srnn model", text);
        rd.expect("# arxflow-srnn 1")?;
        let nh: usize = rd.parse("hidden")?;
        let act: Activation = rd
            .value("activation")?
            .parse()
            .map_err(|e: Error| rd.error(e.to_string()))?;
        let layout = rd.layout()?;
        let ni = layout.n_inputs();
        let mut params = rd.matrix("W_in", nh, ni)?;
        params.extend(rd.matrix("W_rec", nh, nh)?);
        params.extend(rd.matrix("b_h", 1, nh)?);
        params.extend(rd.matrix("w_out", 1, nh)?);
        params.extend(rd.matrix("b_out", 1, 1)?);
        rd.finish()?;
        Ok(SrnnModel {
            layout,
            hidden: nh,
            activation: act,
            params,
        })
    }
}

impl Predictor for SrnnModel {
    type State = Vec<f64>;

    fn max_lag(&self) -> usize {
        self.layout.max_lag()
    }

    fn channels(&self) -> usize {
        self.layout.channels
    }

    fn init_state(&self) -> Vec<f64> {
        vec![0.0; self.hidden]
    }

    fn step(&self, h: &mut Vec<f64>, t: usize, output: &[f64], exogenous: &[&[f64]]) -> f64 {
        let x = self.layout.encode(t, output, exogenous);
        let y = self.cell(h, &x);
        self.layout.decode(y)
    }
}
