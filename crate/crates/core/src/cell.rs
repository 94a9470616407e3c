//! The standard LSTM cell and its six slim variants.
//!
//! Every variant shares the candidate path and the memory update
//!
//! ```text
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ tanh(U_c h_{t-1} + W_c x_t + b_c)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! and differs only in how the input, forget and output gates are formed:
//!
//! | variant | gate `g_t`                       | per-gate parameters |
//! |---------|----------------------------------|---------------------|
//! | LSTM0   | σ(U_g h_{t-1} + W_g x_t + b_g)   | n·d + n² + n        |
//! | LSTM1   | σ(U_g h_{t-1} + b_g)             | n² + n              |
//! | LSTM2   | σ(U_g h_{t-1})                   | n²                  |
//! | LSTM3   | σ(b_g)                           | n                   |
//! | LSTM4   | σ(u_g ⊙ h_{t-1})                 | n                   |
//! | LSTM5   | σ(u_g ⊙ h_{t-1} + b_g)           | 2n                  |
//! | LSTM6   | i = 1, f = α, o = 1              | 0                   |
//!
//! `α` is a fixed hyperparameter in (−1, 1) and never receives a gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activation::{sigmoid, tanh_act};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{add_into, matvec_acc, matvec_t_acc, outer_acc, Tensor};

pub const DEFAULT_ALPHA: f64 = 0.59;
pub const DEFAULT_FORGET_BIAS: f64 = 1.0;

/// Which gate equations a cell uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "LSTM0")]
    Lstm0,
    #[serde(rename = "LSTM1")]
    Lstm1,
    #[serde(rename = "LSTM2")]
    Lstm2,
    #[serde(rename = "LSTM3")]
    Lstm3,
    #[serde(rename = "LSTM4")]
    Lstm4,
    #[serde(rename = "LSTM5")]
    Lstm5,
    #[serde(rename = "LSTM6")]
    Lstm6,
}

/// How a gate reads the previous hidden state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recurrence {
    /// Full `n × n` matrix.
    Matrix,
    /// Length-`n` vector applied elementwise.
    Pointwise,
}

/// The parameter blocks present in each trainable gate of a variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateForm {
    pub input: bool,
    pub recurrence: Option<Recurrence>,
    pub bias: bool,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Lstm0,
        Variant::Lstm1,
        Variant::Lstm2,
        Variant::Lstm3,
        Variant::Lstm4,
        Variant::Lstm5,
        Variant::Lstm6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lstm0 => "LSTM0",
            Variant::Lstm1 => "LSTM1",
            Variant::Lstm2 => "LSTM2",
            Variant::Lstm3 => "LSTM3",
            Variant::Lstm4 => "LSTM4",
            Variant::Lstm5 => "LSTM5",
            Variant::Lstm6 => "LSTM6",
        }
    }

    /// `None` for LSTM6, whose gates are constants.
    pub fn gate_form(self) -> Option<GateForm> {
        use Recurrence::*;
        let form = |input, recurrence, bias| {
            Some(GateForm {
                input,
                recurrence,
                bias,
            })
        };
        match self {
            Variant::Lstm0 => form(true, Some(Matrix), true),
            Variant::Lstm1 => form(false, Some(Matrix), true),
            Variant::Lstm2 => form(false, Some(Matrix), false),
            Variant::Lstm3 => form(false, None, true),
            Variant::Lstm4 => form(false, Some(Pointwise), false),
            Variant::Lstm5 => form(false, Some(Pointwise), true),
            Variant::Lstm6 => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digit = s
            .trim()
            .to_ascii_lowercase()
            .strip_prefix("lstm")
            .and_then(|d| d.parse::<usize>().ok());
        match digit {
            Some(k) if k < Variant::ALL.len() => Ok(Variant::ALL[k]),
            _ => Err(Error::Config(format!(
                "unknown variant {s:?}; expected one of LSTM0..LSTM6"
            ))),
        }
    }
}

fn check_dims(d: usize, n: usize) -> Result<()> {
    if d == 0 || n == 0 {
        return Err(Error::Argument(format!(
            "cell dimensions must be positive, got d={d}, n={n}"
        )));
    }
    Ok(())
}

/// Trainable parameter count of one cell: the candidate path plus three
/// gates.
pub fn count_params(variant: Variant, d: usize, n: usize) -> Result<usize> {
    check_dims(d, n)?;
    let candidate = n * d + n * n + n;
    let per_gate = match variant.gate_form() {
        None => 0,
        Some(form) => {
            let input = if form.input { n * d } else { 0 };
            let recurrent = match form.recurrence {
                Some(Recurrence::Matrix) => n * n,
                Some(Recurrence::Pointwise) => n,
                None => 0,
            };
            let bias = if form.bias { n } else { 0 };
            input + recurrent + bias
        }
    };
    Ok(candidate + 3 * per_gate)
}

/// Parameters of one gate. Which blocks are present depends on the variant.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GateParams {
    /// `W_g`, `n × d`.
    pub input: Option<Tensor>,
    /// `U_g`, `n × n`.
    pub recurrent: Option<Tensor>,
    /// `u_g`, length `n`.
    pub pointwise: Option<Tensor>,
    /// `b_g`, length `n`.
    pub bias: Option<Tensor>,
}

pub const GATE_NAMES: [&str; 3] = ["i", "f", "o"];

/// Weights of a single recurrent cell.
///
/// The same type doubles as the gradient container ([`CellGrads`]); there
/// `alpha` is carried along but meaningless.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Input, forget and output gate, in that order. All empty for LSTM6.
    pub gates: [GateParams; 3],
    pub cand_input: Tensor,
    pub cand_recurrent: Tensor,
    pub cand_bias: Tensor,
    pub alpha: f64,
}

pub type CellGrads = CellParams;

/// Initialization knobs for [`init_params`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitScheme {
    pub forget_bias: f64,
    pub alpha: f64,
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme {
            forget_bias: DEFAULT_FORGET_BIAS,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Uniform `[-1/√n, 1/√n]` for recurrent and pointwise weights,
/// `[-1/√d, 1/√d]` for input weights, zero biases except the forget bias.
pub fn init_params(
    variant: Variant,
    d: usize,
    n: usize,
    rng: &mut Rng,
    scheme: InitScheme,
) -> Result<CellParams> {
    check_dims(d, n)?;
    check_alpha(scheme.alpha)?;
    let s_in = 1.0 / (d as f64).sqrt();
    let s_rec = 1.0 / (n as f64).sqrt();
    let mut gates: [GateParams; 3] = Default::default();
    if let Some(form) = variant.gate_form() {
        for (k, gate) in gates.iter_mut().enumerate() {
            if form.input {
                gate.input = Some(rng.uniform(&[n, d], -s_in, s_in)?);
            }
            match form.recurrence {
                Some(Recurrence::Matrix) => {
                    gate.recurrent = Some(rng.uniform(&[n, n], -s_rec, s_rec)?)
                }
                Some(Recurrence::Pointwise) => {
                    gate.pointwise = Some(rng.uniform(&[n], -s_rec, s_rec)?)
                }
                None => {}
            }
            if form.bias {
                let b = if k == 1 { scheme.forget_bias } else { 0.0 };
                gate.bias = Some(Tensor::filled(&[n], b));
            }
        }
    }
    Ok(CellParams {
        variant,
        input_dim: d,
        hidden_dim: n,
        gates,
        cand_input: rng.uniform(&[n, d], -s_in, s_in)?,
        cand_recurrent: rng.uniform(&[n, n], -s_rec, s_rec)?,
        cand_bias: Tensor::zeros(&[n]),
        alpha: scheme.alpha,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (-1, 1), got {alpha}")));
    }
    Ok(())
}

/// Hidden and memory-cell vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Tensor,
    pub c: Tensor,
}

impl CellState {
    pub fn zeros(n: usize) -> Self {
        CellState {
            h: Tensor::zeros(&[n]),
            c: Tensor::zeros(&[n]),
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    /// Candidate after the tanh.
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl StepCache {
    pub fn h(&self) -> Vec<f64> {
        self.output_gate
            .iter()
            .zip(&self.tanh_c)
            .map(|(o, t)| o * t)
            .collect()
    }
}

fn expect_shape(t: Option<&Tensor>, want: &[usize], what: &str, variant: Variant) -> Result<()> {
    match t {
        Some(t) if t.shape() == want => Ok(()),
        Some(t) => Err(Error::Config(format!(
            "{variant} parameter {what} has shape {:?}, expected {want:?}",
            t.shape()
        ))),
        None => Err(Error::Config(format!("{variant} is missing parameter {what}"))),
    }
}

fn expect_absent(t: Option<&Tensor>, what: &str, variant: Variant) -> Result<()> {
    if t.is_some() {
        return Err(Error::Config(format!("{variant} does not use parameter {what}")));
    }
    Ok(())
}

impl CellParams {
    /// A zero-filled twin with identical structure, used for gradients.
    pub fn zeros_like(&self) -> CellParams {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, t| t.fill(0.0));
        z
    }

    /// Checks that exactly the blocks the variant needs are present with
    /// conforming shapes.
    pub fn validate(&self) -> Result<()> {
        let (d, n, v) = (self.input_dim, self.hidden_dim, self.variant);
        check_dims(d, n)?;
        check_alpha(self.alpha)?;
        let form = v.gate_form();
        for (gate, name) in self.gates.iter().zip(GATE_NAMES) {
            let label = |block: &str| format!("{name}.{block}");
            match form {
                Some(form) if form.input => expect_shape(gate.input.as_ref(), &[n, d], &label("W"), v)?,
                _ => expect_absent(gate.input.as_ref(), &label("W"), v)?,
            }
            match form.and_then(|f| f.recurrence) {
                Some(Recurrence::Matrix) => {
                    expect_shape(gate.recurrent.as_ref(), &[n, n], &label("U"), v)?;
                    expect_absent(gate.pointwise.as_ref(), &label("u"), v)?;
                }
                Some(Recurrence::Pointwise) => {
                    expect_absent(gate.recurrent.as_ref(), &label("U"), v)?;
                    expect_shape(gate.pointwise.as_ref(), &[n], &label("u"), v)?;
                }
                None => {
                    expect_absent(gate.recurrent.as_ref(), &label("U"), v)?;
                    expect_absent(gate.pointwise.as_ref(), &label("u"), v)?;
                }
            }
            match form {
                Some(form) if form.bias => expect_shape(gate.bias.as_ref(), &[n], &label("b"), v)?,
                _ => expect_absent(gate.bias.as_ref(), &label("b"), v)?,
            }
        }
        expect_shape(Some(&self.cand_input), &[n, d], "c.W", v)?;
        expect_shape(Some(&self.cand_recurrent), &[n, n], "c.U", v)?;
        expect_shape(Some(&self.cand_bias), &[n], "c.b", v)?;
        Ok(())
    }

    /// Visits every trainable tensor in a fixed order with a stable name.
    pub fn for_each_tensor(&self, mut f: impl FnMut(String, &Tensor)) {
        for (gate, name) in self.gates.iter().zip(GATE_NAMES) {
            let blocks = [
                ("W", &gate.input),
                ("U", &gate.recurrent),
                ("u", &gate.pointwise),
                ("b", &gate.bias),
            ];
            for (block, t) in blocks {
                if let Some(t) = t {
                    f(format!("{name}.{block}"), t);
                }
            }
        }
        f("c.W".into(), &self.cand_input);
        f("c.U".into(), &self.cand_recurrent);
        f("c.b".into(), &self.cand_bias);
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(String, &mut Tensor)) {
        for (gate, name) in self.gates.iter_mut().zip(GATE_NAMES) {
            let blocks = [
                ("W", &mut gate.input),
                ("U", &mut gate.recurrent),
                ("u", &mut gate.pointwise),
                ("b", &mut gate.bias),
            ];
            for (block, t) in blocks {
                if let Some(t) = t {
                    f(format!("{name}.{block}"), t);
                }
            }
        }
        f("c.W".into(), &mut self.cand_input);
        f("c.U".into(), &mut self.cand_recurrent);
        f("c.b".into(), &mut self.cand_bias);
    }

    /// Total number of trainable scalars actually stored.
    pub fn num_entries(&self) -> usize {
        let mut total = 0;
        self.for_each_tensor(|_, t| total += t.len());
        total
    }

    fn gate_values(&self, k: usize, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let n = self.hidden_dim;
        if self.variant == Variant::Lstm6 {
            let value = if k == 1 { self.alpha } else { 1.0 };
            return vec![value; n];
        }
        let gate = &self.gates[k];
        let mut pre = vec![0.0; n];
        if let Some(w) = &gate.input {
            matvec_acc(w.data(), self.input_dim, x, &mut pre);
        }
        if let Some(u) = &gate.recurrent {
            matvec_acc(u.data(), n, h_prev, &mut pre);
        }
        if let Some(u) = &gate.pointwise {
            for ((p, ui), hi) in pre.iter_mut().zip(u.data()).zip(h_prev) {
                *p += ui * hi;
            }
        }
        if let Some(b) = &gate.bias {
            add_into(&mut pre, b.data());
        }
        pre.into_iter().map(sigmoid).collect()
    }

    /// One step on raw slices; shapes must already be validated.
    fn step_unchecked(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let n = self.hidden_dim;
        let input_gate = self.gate_values(0, x, h_prev);
        let forget_gate = self.gate_values(1, x, h_prev);
        let output_gate = self.gate_values(2, x, h_prev);

        let mut cand = self.cand_bias.data().to_vec();
        matvec_acc(self.cand_input.data(), self.input_dim, x, &mut cand);
        matvec_acc(self.cand_recurrent.data(), n, h_prev, &mut cand);
        let candidate: Vec<f64> = cand.into_iter().map(tanh_act).collect();

        let c: Vec<f64> = (0..n)
            .map(|j| forget_gate[j] * c_prev[j] + input_gate[j] * candidate[j])
            .collect();
        let tanh_c = c.iter().map(|&v| tanh_act(v)).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            input_gate,
            forget_gate,
            output_gate,
            candidate,
            c,
            tanh_c,
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != [self.input_dim] {
            return Err(Error::shape("cell input", x.shape(), &[self.input_dim]));
        }
        Ok(())
    }

    fn check_state(&self, state: &CellState) -> Result<()> {
        let n = self.hidden_dim;
        for t in [&state.h, &state.c] {
            if t.shape() != [n] {
                return Err(Error::shape("cell state", t.shape(), &[n]));
            }
        }
        Ok(())
    }
}

/// Input, forget and output gate activations for one step.
pub fn gate_forward(params: &CellParams, x_t: &Tensor, h_prev: &Tensor) -> Result<[Tensor; 3]> {
    params.validate()?;
    params.check_input(x_t)?;
    if h_prev.shape() != [params.hidden_dim] {
        return Err(Error::shape("gate_forward", h_prev.shape(), &[params.hidden_dim]));
    }
    let gate = |k| Tensor::vector(params.gate_values(k, x_t.data(), h_prev.data()));
    Ok([gate(0), gate(1), gate(2)])
}

pub fn cell_step(params: &CellParams, x_t: &Tensor, state: &CellState) -> Result<(CellState, StepCache)> {
    params.validate()?;
    params.check_input(x_t)?;
    params.check_state(state)?;
    let cache = params.step_unchecked(x_t.data(), state.h.data(), state.c.data());
    let next = CellState {
        h: Tensor::vector(cache.h()),
        c: Tensor::vector(cache.c.clone()),
    };
    Ok((next, cache))
}

/// Runs the cell over the rows of `xs` (`T × d`), returning the hidden
/// states as a `T × n` matrix and one cache per step.
pub fn sequence_forward(
    params: &CellParams,
    xs: &Tensor,
    init: &CellState,
) -> Result<(Tensor, Vec<StepCache>)> {
    params.validate()?;
    params.check_state(init)?;
    if xs.rank() != 2 || xs.cols() != params.input_dim {
        return Err(Error::shape("sequence_forward", xs.shape(), &[0, params.input_dim]));
    }
    let steps = xs.rows();
    let n = params.hidden_dim;
    let mut hs = Vec::with_capacity(steps * n);
    let mut caches: Vec<StepCache> = Vec::with_capacity(steps);
    for t in 0..steps {
        let cache = match caches.last() {
            None => params.step_unchecked(xs.row(t), init.h.data(), init.c.data()),
            Some(prev) => params.step_unchecked(xs.row(t), &prev.h(), &prev.c),
        };
        hs.extend(cache.h());
        caches.push(cache);
    }
    Ok((Tensor::matrix(steps, n, hs)?, caches))
}

/// Reverse-mode gradients of `Σ_t ⟨d_hs[t], h_t⟩`.
///
/// Returns the parameter gradients, the gradient for each input row, and
/// the gradient for the initial state.
pub fn sequence_backward(
    params: &CellParams,
    caches: &[StepCache],
    d_hs: &Tensor,
) -> Result<(CellGrads, Tensor, CellState)> {
    params.validate()?;
    let n = params.hidden_dim;
    let d = params.input_dim;
    if caches.is_empty() {
        return Err(Error::Argument("backward pass needs at least one cached step".into()));
    }
    if d_hs.rank() != 2 || d_hs.shape() != [caches.len(), n] {
        return Err(Error::Argument(format!(
            "output gradient shape {:?} does not match {} cached steps of width {n}",
            d_hs.shape(),
            caches.len()
        )));
    }
    if caches.iter().any(|c| c.x.len() != d || c.c.len() != n) {
        return Err(Error::Argument("cache does not belong to this cell".into()));
    }

    let mut grads = params.zeros_like();
    let mut d_xs = vec![0.0; caches.len() * d];
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let slim = params.variant.gate_form();

    for (t, cache) in caches.iter().enumerate().rev() {
        let mut dh = d_hs.row(t).to_vec();
        add_into(&mut dh, &dh_next);

        let mut dc = dc_next.clone();
        let mut d_gate_out = vec![0.0; n]; // d o_t
        for j in 0..n {
            d_gate_out[j] = dh[j] * cache.tanh_c[j];
            dc[j] += dh[j] * cache.output_gate[j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
        }

        let mut d_input_gate = vec![0.0; n];
        let mut d_forget_gate = vec![0.0; n];
        let mut d_cand_pre = vec![0.0; n];
        let mut dc_prev = vec![0.0; n];
        for j in 0..n {
            d_input_gate[j] = dc[j] * cache.candidate[j];
            d_forget_gate[j] = dc[j] * cache.c_prev[j];
            let g = cache.candidate[j];
            d_cand_pre[j] = dc[j] * cache.input_gate[j] * (1.0 - g * g);
            dc_prev[j] = dc[j] * cache.forget_gate[j];
        }

        let dx = &mut d_xs[t * d..(t + 1) * d];
        let mut dh_prev = vec![0.0; n];

        // candidate path
        outer_acc(grads.cand_input.data_mut(), &d_cand_pre, &cache.x);
        outer_acc(grads.cand_recurrent.data_mut(), &d_cand_pre, &cache.h_prev);
        add_into(grads.cand_bias.data_mut(), &d_cand_pre);
        matvec_t_acc(params.cand_input.data(), d, &d_cand_pre, dx);
        matvec_t_acc(params.cand_recurrent.data(), n, &d_cand_pre, &mut dh_prev);

        if slim.is_some() {
            let gate_acts = [&cache.input_gate, &cache.forget_gate, &cache.output_gate];
            let gate_grads = [&d_input_gate, &d_forget_gate, &d_gate_out];
            for k in 0..3 {
                let d_pre: Vec<f64> = gate_acts[k]
                    .iter()
                    .zip(gate_grads[k].iter())
                    .map(|(&g, &dg)| dg * g * (1.0 - g))
                    .collect();
                let p = &params.gates[k];
                let g = &mut grads.gates[k];
                if let (Some(w), Some(dw)) = (&p.input, &mut g.input) {
                    outer_acc(dw.data_mut(), &d_pre, &cache.x);
                    matvec_t_acc(w.data(), d, &d_pre, dx);
                }
                if let (Some(u), Some(du)) = (&p.recurrent, &mut g.recurrent) {
                    outer_acc(du.data_mut(), &d_pre, &cache.h_prev);
                    matvec_t_acc(u.data(), n, &d_pre, &mut dh_prev);
                }
                if let (Some(u), Some(du)) = (&p.pointwise, &mut g.pointwise) {
                    for j in 0..n {
                        du.data_mut()[j] += d_pre[j] * cache.h_prev[j];
                        dh_prev[j] += d_pre[j] * u.data()[j];
                    }
                }
                if let Some(db) = &mut g.bias {
                    add_into(db.data_mut(), &d_pre);
                }
            }
        }

        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    let d_init = CellState {
        h: Tensor::vector(dh_next),
        c: Tensor::vector(dc_next),
    };
    Ok((grads, Tensor::matrix(caches.len(), d, d_xs)?, d_init))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn ones_lstm0() -> CellParams {
        let one = |shape: &[usize]| Some(Tensor::filled(shape, 1.0));
        let gate = || GateParams {
            input: one(&[1, 1]),
            recurrent: one(&[1, 1]),
            pointwise: None,
            bias: Some(Tensor::zeros(&[1])),
        };
        CellParams {
            variant: Variant::Lstm0,
            input_dim: 1,
            hidden_dim: 1,
            gates: [gate(), gate(), gate()],
            cand_input: Tensor::filled(&[1, 1], 1.0),
            cand_recurrent: Tensor::filled(&[1, 1], 1.0),
            cand_bias: Tensor::zeros(&[1]),
            alpha: DEFAULT_ALPHA,
        }
    }

    fn random(variant: Variant, d: usize, n: usize, seed: u64) -> CellParams {
        let mut p = init_params(variant, d, n, &mut Rng::new(seed), InitScheme::default()).unwrap();
        // Nonzero biases so every block is exercised.
        let mut rng = Rng::new(seed ^ 0xb1a5);
        p.for_each_tensor_mut(|name, t| {
            if name.ends_with(".b") {
                *t = rng.uniform(t.shape(), -0.5, 0.5).unwrap();
            }
        });
        p
    }

    #[test]
    fn counts_at_128_64() {
        let c = |v| count_params(v, 128, 64).unwrap();
        assert_eq!(c(Variant::Lstm0), 49408);
        assert_eq!(c(Variant::Lstm1), 24832);
        assert_eq!(c(Variant::Lstm3), 12544);
        assert_eq!(c(Variant::Lstm6), 12352);
    }

    #[test]
    fn count_rejects_zero_dims() {
        assert!(count_params(Variant::Lstm0, 0, 4).is_err());
        assert!(count_params(Variant::Lstm0, 4, 0).is_err());
    }

    #[test]
    fn constructed_params_match_count() {
        for v in Variant::ALL {
            let p = init_params(v, 5, 3, &mut Rng::new(1), InitScheme::default()).unwrap();
            assert_eq!(p.num_entries(), count_params(v, 5, 3).unwrap(), "{v}");
            p.validate().unwrap();
        }
    }

    #[test]
    fn lstm6_params_are_candidate_only() {
        let p = init_params(Variant::Lstm6, 4, 3, &mut Rng::new(2), InitScheme::default()).unwrap();
        let mut names = vec![];
        p.for_each_tensor(|name, _| names.push(name));
        assert_eq!(names, ["c.W", "c.U", "c.b"]);
        assert_eq!(p.alpha, 0.59);
    }

    #[test]
    fn init_is_seed_deterministic_and_sets_forget_bias() {
        let a = init_params(Variant::Lstm0, 4, 3, &mut Rng::new(5), InitScheme::default()).unwrap();
        let b = init_params(Variant::Lstm0, 4, 3, &mut Rng::new(5), InitScheme::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gates[1].bias.as_ref().unwrap().data(), &[1.0; 3]);
        assert_eq!(a.gates[0].bias.as_ref().unwrap().data(), &[0.0; 3]);
        let bound = 1.0 / 2.0; // 1/√4
        assert!(a.gates[0].input.as_ref().unwrap().max_abs() <= bound);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("LSTM4".parse::<Variant>().unwrap(), Variant::Lstm4);
        assert_eq!("lstm0".parse::<Variant>().unwrap(), Variant::Lstm0);
        assert!("LSTM7".parse::<Variant>().is_err());
        assert!("gru".parse::<Variant>().is_err());
    }

    #[test]
    fn lstm6_gates_are_constants() {
        let p = random(Variant::Lstm6, 3, 4, 1);
        let x = Tensor::vector(vec![0.3, -2.0, 5.0]);
        let h = Tensor::vector(vec![0.9, -0.1, 0.4, 0.2]);
        let [i, f, o] = gate_forward(&p, &x, &h).unwrap();
        assert_eq!(i.data(), &[1.0; 4]);
        assert_eq!(f.data(), &[0.59; 4]);
        assert_eq!(o.data(), &[1.0; 4]);
    }

    #[test]
    fn lstm2_zero_state_gives_half_gates() {
        let p = random(Variant::Lstm2, 3, 2, 4);
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let [i, f, o] = gate_forward(&p, &x, &Tensor::zeros(&[2])).unwrap();
        for g in [i, f, o] {
            assert_eq!(g.data(), &[0.5, 0.5]);
        }
    }

    #[test]
    fn lstm0_scalar_gates_and_step() {
        let p = ones_lstm0();
        let x = Tensor::vector(vec![1.0]);
        let [i, f, o] = gate_forward(&p, &x, &Tensor::zeros(&[1])).unwrap();
        for g in [i, f, o] {
            assert!((g.data()[0] - 0.7310586).abs() < 1e-7);
        }
        let (s1, _) = cell_step(&p, &x, &CellState::zeros(1)).unwrap();
        // σ(1)·tanh(1) and σ(1)·tanh(c1), from an independent evaluation.
        assert!((s1.c.data()[0] - 0.556_769_941_1).abs() < 1e-9, "{:?}", s1.c);
        assert!((s1.h.data()[0] - 0.369_606_352_9).abs() < 1e-9, "{:?}", s1.h);
    }

    #[test]
    fn lstm6_decays_geometrically() {
        let mut p = random(Variant::Lstm6, 2, 1, 3);
        p.for_each_tensor_mut(|_, t| t.fill(0.0));
        let init = CellState {
            h: Tensor::zeros(&[1]),
            c: Tensor::vector(vec![1.0]),
        };
        let xs = Tensor::matrix(2, 2, vec![0.4, -0.7, 1.1, 0.2]).unwrap();
        let (_, caches) = sequence_forward(&p, &xs, &init).unwrap();
        assert!((caches[0].c[0] - 0.59).abs() < 1e-15);
        assert!((caches[1].c[0] - 0.3481).abs() < 1e-15);
    }

    #[test]
    fn zero_params_keep_zero_state() {
        for v in Variant::ALL {
            let mut p = random(v, 3, 2, 9);
            p.for_each_tensor_mut(|_, t| t.fill(0.0));
            let xs = Tensor::matrix(3, 3, vec![1.0, -2.0, 0.5, 3.0, 0.1, -1.0, 2.0, 2.0, 2.0]).unwrap();
            let (hs, caches) = sequence_forward(&p, &xs, &CellState::zeros(2)).unwrap();
            assert!(hs.data().iter().all(|&h| h == 0.0), "{v}");
            assert!(caches.iter().all(|c| c.c.iter().all(|&x| x == 0.0)), "{v}");
        }
    }

    #[test]
    fn single_step_sequence_matches_cell_step() {
        let p = random(Variant::Lstm5, 3, 4, 11);
        let x = Tensor::vector(vec![0.2, -0.4, 0.9]);
        let init = CellState {
            h: Tensor::vector(vec![0.1, 0.2, -0.3, 0.0]),
            c: Tensor::vector(vec![-0.5, 0.5, 1.0, 0.2]),
        };
        let (state, cache) = cell_step(&p, &x, &init).unwrap();
        let (hs, caches) = sequence_forward(&p, &x.clone().reshape(&[1, 3]).unwrap(), &init).unwrap();
        assert_eq!(hs.data(), state.h.data());
        assert_eq!(caches, vec![cache]);
    }

    #[test]
    fn split_sequence_threads_state() {
        let p = random(Variant::Lstm1, 2, 3, 12);
        let mut rng = Rng::new(13);
        let xs = rng.uniform(&[6, 2], -1.0, 1.0).unwrap();
        let init = CellState::zeros(3);
        let (full, _) = sequence_forward(&p, &xs, &init).unwrap();
        let first = Tensor::matrix(4, 2, xs.data()[..8].to_vec()).unwrap();
        let second = Tensor::matrix(2, 2, xs.data()[8..].to_vec()).unwrap();
        let (h1, c1) = sequence_forward(&p, &first, &init).unwrap();
        let last = c1.last().unwrap();
        let mid = CellState {
            h: Tensor::vector(last.h()),
            c: Tensor::vector(last.c.clone()),
        };
        let (h2, _) = sequence_forward(&p, &second, &mid).unwrap();
        let mut joined = h1.data().to_vec();
        joined.extend_from_slice(h2.data());
        assert_eq!(joined, full.data());
    }

    #[test]
    fn empty_sequence_and_bad_shapes_rejected() {
        let p = random(Variant::Lstm0, 2, 2, 1);
        assert!(Tensor::new(&[0, 2], vec![]).is_err());
        let wrong = Tensor::zeros(&[3, 5]);
        assert!(sequence_forward(&p, &wrong, &CellState::zeros(2)).is_err());
        assert!(sequence_backward(&p, &[], &Tensor::zeros(&[1, 2])).is_err());
    }

    #[test]
    fn missing_block_is_a_config_error() {
        let mut p = random(Variant::Lstm1, 2, 2, 1);
        p.gates[2].bias = None;
        let err = p.validate().unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("o.b"));

        let mut p = random(Variant::Lstm3, 2, 2, 1);
        p.gates[0].recurrent = Some(Tensor::zeros(&[2, 2]));
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        for v in Variant::ALL {
            let p = random(v, 3, 2, 21);
            let xs = Rng::new(4).uniform(&[3, 3], -1.0, 1.0).unwrap();
            let (_, caches) = sequence_forward(&p, &xs, &CellState::zeros(2)).unwrap();
            let (g, dx, d0) = sequence_backward(&p, &caches, &Tensor::zeros(&[3, 2])).unwrap();
            assert_eq!(g, p.zeros_like());
            assert!(dx.data().iter().all(|&x| x == 0.0));
            assert!(d0.h.data().iter().chain(d0.c.data()).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn lstm0_scalar_candidate_weight_gradient() {
        // d h1 / d W_c for the all-ones scalar cell, by central difference.
        let p = ones_lstm0();
        let xs = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let h1 = |w: f64| {
            let mut q = p.clone();
            q.cand_input.data_mut()[0] = w;
            sequence_forward(&q, &xs, &CellState::zeros(1)).unwrap().0.data()[0]
        };
        let eps = 1e-6;
        let numeric = (h1(1.0 + eps) - h1(1.0 - eps)) / (2.0 * eps);
        let (_, caches) = sequence_forward(&p, &xs, &CellState::zeros(1)).unwrap();
        let (g, _, _) = sequence_backward(&p, &caches, &Tensor::filled(&[1, 1], 1.0)).unwrap();
        assert!((g.cand_input.data()[0] - numeric).abs() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn slim_gates_stay_in_open_unit_interval(
            k in 0usize..6,
            seed in any::<u64>(),
            scale in 0.1f64..5.0,
        ) {
            let v = Variant::ALL[k];
            let mut p = random(v, 3, 4, seed);
            p.for_each_tensor_mut(|_, t| *t = t.scale(scale));
            let mut rng = Rng::new(seed.wrapping_add(1));
            let x = rng.uniform(&[3], -scale, scale).unwrap();
            let h = rng.uniform(&[4], -1.0, 1.0).unwrap();
            for g in gate_forward(&p, &x, &h).unwrap() {
                prop_assert!(g.data().iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }

        #[test]
        fn forward_is_deterministic(k in 0usize..7, seed in any::<u64>()) {
            let p = random(Variant::ALL[k], 2, 3, seed);
            let xs = Rng::new(seed).uniform(&[4, 2], -2.0, 2.0).unwrap();
            let a = sequence_forward(&p, &xs, &CellState::zeros(3)).unwrap();
            let b = sequence_forward(&p, &xs, &CellState::zeros(3)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
