//! LSTM and GRU encoders over the structured features of a window.

use crate::autodiff::{Graph, Params, Tensor, Var};
use crate::error::Result;

/// Hidden state after every step, each `[batch, hidden]`.
pub type HiddenStates = Vec<Var>;

/// Per-step inputs `[batch, width]` gathered from `[batch * steps, width]`.
fn step_rows(batch: usize, steps: usize, t: usize) -> Vec<usize> {
    (0..batch).map(|b| b * steps + t).collect()
}

/// Canonical LSTM with gate order (input, forget, cell, output):
///
/// ```text
/// [i f g o] = x W_ih + h W_hh + b
/// c' = σ(f) ⊙ c + σ(i) ⊙ tanh(g)
/// h' = σ(o) ⊙ tanh(c')
/// ```
pub fn lstm_encode(
    g: &mut Graph,
    params: &Params,
    x: Var,
    batch: usize,
    steps: usize,
    hidden: usize,
) -> Result<HiddenStates> {
    let w_ih = g.param(params, "lstm.w_ih")?;
    let w_hh = g.param(params, "lstm.w_hh")?;
    let bias = g.param(params, "lstm.b")?;
    let projected = g.matmul(x, w_ih)?;
    let projected = g.add_bias(projected, bias)?;

    let mut h = g.input(Tensor::zeros(&[batch, hidden]))?;
    let mut c = g.input(Tensor::zeros(&[batch, hidden]))?;
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let xt = g.gather_rows(projected, &step_rows(batch, steps, t))?;
        let hh = g.matmul(h, w_hh)?;
        let gates = g.add(xt, hh)?;
        let i = g.slice(gates, 1, 0, hidden)?;
        let f = g.slice(gates, 1, hidden, 2 * hidden)?;
        let cand = g.slice(gates, 1, 2 * hidden, 3 * hidden)?;
        let o = g.slice(gates, 1, 3 * hidden, 4 * hidden)?;
        let i = g.sigmoid(i)?;
        let f = g.sigmoid(f)?;
        let cand = g.tanh(cand)?;
        let o = g.sigmoid(o)?;
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        c = g.add(keep, write)?;
        let tc = g.tanh(c)?;
        h = g.mul(o, tc)?;
        states.push(h);
    }
    Ok(states)
}

/// GRU with reset gate applied after the hidden projection:
///
/// ```text
/// r = σ(x W_ir + b_ir + h W_hr + b_hr)
/// z = σ(x W_iz + b_iz + h W_hz + b_hz)
/// n = tanh(x W_in + b_in + r ⊙ (h W_hn + b_hn))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
pub fn gru_encode(
    g: &mut Graph,
    params: &Params,
    x: Var,
    batch: usize,
    steps: usize,
    hidden: usize,
) -> Result<HiddenStates> {
    let w_ih = g.param(params, "gru.w_ih")?;
    let w_hh = g.param(params, "gru.w_hh")?;
    let b_ih = g.param(params, "gru.b_ih")?;
    let b_hh = g.param(params, "gru.b_hh")?;
    let projected = g.matmul(x, w_ih)?;
    let projected = g.add_bias(projected, b_ih)?;

    let mut h = g.input(Tensor::zeros(&[batch, hidden]))?;
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let xt = g.gather_rows(projected, &step_rows(batch, steps, t))?;
        let hh = g.matmul(h, w_hh)?;
        let hh = g.add_bias(hh, b_hh)?;
        let x_r = g.slice(xt, 1, 0, hidden)?;
        let x_z = g.slice(xt, 1, hidden, 2 * hidden)?;
        let x_n = g.slice(xt, 1, 2 * hidden, 3 * hidden)?;
        let h_r = g.slice(hh, 1, 0, hidden)?;
        let h_z = g.slice(hh, 1, hidden, 2 * hidden)?;
        let h_n = g.slice(hh, 1, 2 * hidden, 3 * hidden)?;
        let r = g.add(x_r, h_r)?;
        let r = g.sigmoid(r)?;
        let z = g.add(x_z, h_z)?;
        let z = g.sigmoid(z)?;
        let gated = g.mul(r, h_n)?;
        let n = g.add(x_n, gated)?;
        let n = g.tanh(n)?;
        let keep_new = g.one_minus(z)?;
        let a = g.mul(keep_new, n)?;
        let b = g.mul(z, h)?;
        h = g.add(a, b)?;
        states.push(h);
    }
    Ok(states)
}
