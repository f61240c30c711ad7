use super::text::{write_layout, write_matrix, Reader};
use super::{init_uniform, IoLayout, Sequence};
use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::rng::seeded;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, kept for back-propagation.
#[derive(Debug, Clone)]
struct Tape {
    gates: Vec<f64>, // i, f, g, o blocks of `hidden`
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Standard LSTM cell with a linear read-out. Gates are stacked in the order
/// input, forget, candidate, output: `z = W·x + U·h(t−1) + b`,
/// `c(t) = f∘c(t−1) + i∘g`, `h(t) = o∘tanh(c(t))`, `ŷ = w_out·h + b_out`.
///
/// Flat parameter order: `W` (4H×I, row-major), `U` (4H×H), `b` (4H),
/// `w_out` (H), `b_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub layout: IoLayout,
    pub hidden: usize,
    params: Vec<f64>,
}

impl LstmModel {
    pub const DEFAULT_HIDDEN: usize = 32;

    pub fn n_params_for(inputs: usize, hidden: usize) -> usize {
        4 * hidden * (inputs + hidden + 1) + hidden + 1
    }

    pub fn zeros(layout: IoLayout, hidden: usize) -> Self {
        let n = Self::n_params_for(layout.n_inputs(), hidden);
        LstmModel {
            layout,
            hidden,
            params: vec![0.0; n],
        }
    }

    /// Weights uniform in `±1/√fan_in`, forget-gate bias 1, other biases 0.
    pub fn new(layout: IoLayout, hidden: usize, seed: u64) -> Self {
        let mut m = Self::zeros(layout, hidden);
        let mut rng = seeded(seed);
        let fan = m.n_inputs() + hidden;
        let b = m.off_b();
        init_uniform(&mut rng, &mut m.params[..b], fan);
        m.b_mut()[hidden..2 * hidden].fill(1.0);
        let (o, e) = (m.off_w_out(), m.off_b_out());
        init_uniform(&mut rng, &mut m.params[o..e], hidden);
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

    fn off_u(&self) -> usize {
        4 * self.hidden * self.n_inputs()
    }
    fn off_b(&self) -> usize {
        self.off_u() + 4 * self.hidden * self.hidden
    }
    fn off_w_out(&self) -> usize {
        self.off_b() + 4 * self.hidden
    }
    fn off_b_out(&self) -> usize {
        self.off_w_out() + self.hidden
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        let e = self.off_u();
        &mut self.params[..e]
    }
    pub fn u_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.off_u(), self.off_b());
        &mut self.params[s..e]
    }
    pub fn b_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.off_b(), self.off_w_out());
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

    fn cell(&self, state: &mut LstmState, x: &[f64]) -> (f64, Tape) {
        let (ni, nh) = (self.n_inputs(), self.hidden);
        let p = &self.params;
        let (ou, ob, ow) = (self.off_u(), self.off_b(), self.off_w_out());
        let mut gates = vec![0.0; 4 * nh];
        for (r, gate) in gates.iter_mut().enumerate() {
            let mut z = p[ob + r];
            for k in 0..ni {
                z += p[r * ni + k] * x[k];
            }
            for k in 0..nh {
                z += p[ou + r * nh + k] * state.h[k];
            }
            *gate = if (2 * nh..3 * nh).contains(&r) {
                z.tanh()
            } else {
                sigmoid(z)
            };
        }
        let mut tanh_c = vec![0.0; nh];
        let mut y = p[self.off_b_out()];
        for j in 0..nh {
            let (i, f, g, o) = (
                gates[j],
                gates[nh + j],
                gates[2 * nh + j],
                gates[3 * nh + j],
            );
            state.c[j] = f * state.c[j] + i * g;
            tanh_c[j] = state.c[j].tanh();
            state.h[j] = o * tanh_c[j];
            y += p[ow + j] * state.h[j];
        }
        let tape = Tape {
            gates,
            c: state.c.clone(),
            tanh_c,
            h: state.h.clone(),
        };
        (y, tape)
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

    fn run(&self, seq: &Sequence, start: &LstmState) -> Result<(Vec<f64>, Vec<Tape>)> {
        self.check_inputs(seq)?;
        if start.h.len() != self.hidden || start.c.len() != self.hidden {
            return Err(Error::DimensionMismatch(
                "initial state size differs from the hidden size".into(),
            ));
        }
        let mut state = start.clone();
        let mut pred = Vec::with_capacity(seq.len());
        let mut tapes = Vec::with_capacity(seq.len());
        for t in 0..seq.len() {
            let x: Vec<f64> = seq.inputs.column(t).iter().copied().collect();
            let (y, tape) = self.cell(&mut state, &x);
            pred.push(y);
            tapes.push(tape);
        }
        Ok((pred, tapes))
    }

    /// Scaled predictions from a zero state.
    pub fn forward(&self, seq: &Sequence) -> Result<Vec<f64>> {
        self.forward_from(seq, &LstmState::zeros(self.hidden))
            .map(|(p, _)| p)
    }

    /// Predictions and the final state, starting from `start`.
    pub fn forward_from(&self, seq: &Sequence, start: &LstmState) -> Result<(Vec<f64>, LstmState)> {
        let (pred, tapes) = self.run(seq, start)?;
        let end = match tapes.last() {
            Some(t) => LstmState {
                h: t.h.clone(),
                c: t.c.clone(),
            },
            None => start.clone(),
        };
        Ok((pred, end))
    }

    /// Loss `½ Σ_t w_t (ŷ_t − y_t)²` and its exact gradient by
    /// back-propagation through time from a zero state.
    pub fn gradient(&self, seq: &Sequence, weights: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let zero = LstmState::zeros(self.hidden);
        let (pred, tapes) = self.run(seq, &zero)?;
        let (ni, nh) = (self.n_inputs(), self.hidden);
        let p = &self.params;
        let (ou, ob, ow, obo) = (
            self.off_u(),
            self.off_b(),
            self.off_w_out(),
            self.off_b_out(),
        );
        let mut grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        let mut dh_next = vec![0.0; nh];
        let mut dc_next = vec![0.0; nh];
        let mut dz = vec![0.0; 4 * nh];
        for t in (0..seq.len()).rev() {
            let w = weights.map_or(1.0, |w| w[t]);
            let diff = pred[t] - seq.targets[t];
            loss += 0.5 * w * diff * diff;
            let e = w * diff;
            let tp = &tapes[t];
            let (h_prev, c_prev) = if t > 0 {
                (&tapes[t - 1].h, &tapes[t - 1].c)
            } else {
                (&zero.h, &zero.c)
            };
            grad[obo] += e;
            for j in 0..nh {
                grad[ow + j] += e * tp.h[j];
                let dh = e * p[ow + j] + dh_next[j];
                let (i, f, g, o) = (
                    tp.gates[j],
                    tp.gates[nh + j],
                    tp.gates[2 * nh + j],
                    tp.gates[3 * nh + j],
                );
                let dc = dh * o * (1.0 - tp.tanh_c[j] * tp.tanh_c[j]) + dc_next[j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[nh + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * nh + j] = dc * i * (1.0 - g * g);
                dz[3 * nh + j] = dh * tp.tanh_c[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            dh_next.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                grad[ob + r] += d;
                for k in 0..ni {
                    grad[r * ni + k] += d * seq.inputs[(k, t)];
                }
                for k in 0..nh {
                    grad[ou + r * nh + k] += d * h_prev[k];
                    dh_next[k] += p[ou + r * nh + k] * d;
                }
            }
        }
        if !loss.is_finite() || grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok((loss, grad))
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_text(&mut out)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("model text is UTF-8")
    }

    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let (ni, nh) = (self.n_inputs(), self.hidden);
        let p = &self.params;
        writeln!(out, "# arxflow-lstm 1")?;
        writeln!(out, "hidden = {nh}")?;
        write_layout(&mut out, &self.layout)?;
        write_matrix(&mut out, "W", 4 * nh, ni, &p[..self.off_u()])?;
        write_matrix(&mut out, "U", 4 * nh, nh, &p[self.off_u()..self.off_b()])?;
        write_matrix(&mut out, "b", 1, 4 * nh, &p[self.off_b()..self.off_w_out()])?;
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
        let mut rd = Reader::new("lstm model", text);
        rd.expect("# arxflow-lstm 1")?;
        let nh: usize = rd.parse("hidden")?;
        let layout = rd.layout()?;
        let ni = layout.n_inputs();
        let mut params = rd.matrix("W", 4 * nh, ni)?;
        params.extend(rd.matrix("U", 4 * nh, nh)?);
        params.extend(rd.matrix("b", 1, 4 * nh)?);
        params.extend(rd.matrix("w_out", 1, nh)?);
        params.extend(rd.matrix("b_out", 1, 1)?);
        rd.finish()?;
        Ok(LstmModel {
            layout,
            hidden: nh,
            params,
        })
    }
}

impl Predictor for LstmModel {
    type State = LstmState;

    fn max_lag(&self) -> usize {
        self.layout.max_lag()
    }

    fn channels(&self) -> usize {
        self.layout.channels
    }

    fn init_state(&self) -> LstmState {
        LstmState::zeros(self.hidden)
    }

    fn step(&self, state: &mut LstmState, t: usize, output: &[f64], exogenous: &[&[f64]]) -> f64 {
        let x = self.layout.encode(t, output, exogenous);
        let (y, _) = self.cell(state, &x);
        self.layout.decode(y)
    }
}
