//! Single-direction LSTM layer: forward recurrence with activation caching
//! and backpropagation through time.
//!
//! Gate rows are stacked `[input, forget, candidate, output]`, each `hidden`
//! rows tall. No peepholes.

use super::frames::Frames;
use super::linalg::{add_matvec, add_matvec_transposed, add_outer};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    /// `4·hidden × input`, row-major.
    pub w_ih: Vec<f64>,
    /// `4·hidden × hidden`, row-major.
    pub w_hh: Vec<f64>,
    /// `4·hidden`.
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w_ih: vec![0.0; 4 * hidden * input],
            w_hh: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }
}

/// Activations of one direction, indexed by time (not processing order).
#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    reverse: bool,
    /// Post-activation gates `[i, f, g, o]`.
    gates: Frames,
    cell: Frames,
    cell_tanh: Frames,
    pub(crate) hidden: Frames,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn previous(t: usize, len: usize, reverse: bool) -> Option<usize> {
    if reverse {
        (t + 1 < len).then_some(t + 1)
    } else {
        t.checked_sub(1)
    }
}

/// Runs the recurrence over `xs` from zero initial state, walking backwards
/// in time when `reverse` is set.
pub(crate) fn forward(p: &LstmParams, xs: &Frames, reverse: bool) -> LstmCache {
    let len = xs.len();
    let h = p.hidden;
    let mut gates = Frames::zeros(len, 4 * h);
    let mut cell = Frames::zeros(len, h);
    let mut cell_tanh = Frames::zeros(len, h);
    let mut hidden = Frames::zeros(len, h);
    let zero = vec![0.0; h];
    let mut z = vec![0.0; 4 * h];

    for step in 0..len {
        let t = if reverse { len - 1 - step } else { step };
        let prev = previous(t, len, reverse);
        z.copy_from_slice(&p.bias);
        add_matvec(&p.w_ih, xs.row(t), &mut z);
        let (h_prev, c_prev) = match prev {
            Some(q) => (hidden.row(q).to_vec(), cell.row(q).to_vec()),
            None => (zero.clone(), zero.clone()),
        };
        add_matvec(&p.w_hh, &h_prev, &mut z);

        let g_row = gates.row_mut(t);
        for k in 0..h {
            g_row[k] = sigmoid(z[k]);
            g_row[h + k] = sigmoid(z[h + k]);
            g_row[2 * h + k] = z[2 * h + k].tanh();
            g_row[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let g_row = gates.row(t).to_vec();
        let c_row = cell.row_mut(t);
        for k in 0..h {
            c_row[k] = g_row[h + k] * c_prev[k] + g_row[k] * g_row[2 * h + k];
        }
        let c_row = cell.row(t).to_vec();
        let tc = cell_tanh.row_mut(t);
        for k in 0..h {
            tc[k] = c_row[k].tanh();
        }
        let tc = cell_tanh.row(t).to_vec();
        let h_row = hidden.row_mut(t);
        for k in 0..h {
            h_row[k] = g_row[3 * h + k] * tc[k];
        }
    }
    LstmCache {
        reverse,
        gates,
        cell,
        cell_tanh,
        hidden,
    }
}

/// Backpropagation through time. `d_hidden` is the loss gradient w.r.t. each
/// hidden output; parameter gradients accumulate into `grad`, and input
/// gradients accumulate into `d_input`.
pub(crate) fn backward(
    p: &LstmParams,
    xs: &Frames,
    cache: &LstmCache,
    d_hidden: &Frames,
    grad: &mut LstmParams,
    d_input: &mut Frames,
) {
    let len = xs.len();
    let h = p.hidden;
    let zero = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let mut dc = vec![0.0; h];

    for step in (0..len).rev() {
        let t = if cache.reverse { len - 1 - step } else { step };
        let prev = previous(t, len, cache.reverse);
        let gates = cache.gates.row(t);
        let tc = cache.cell_tanh.row(t);
        let (h_prev, c_prev) = match prev {
            Some(q) => (cache.hidden.row(q), cache.cell.row(q)),
            None => (zero.as_slice(), zero.as_slice()),
        };
        let dh_out = d_hidden.row(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let dh = dh_out[k] + dh_next[k];
            let d_o = dh * tc[k];
            dc[k] = dc_next[k] + dh * o * (1.0 - tc[k] * tc[k]);
            let d_i = dc[k] * g;
            let d_g = dc[k] * i;
            let d_f = dc[k] * c_prev[k];
            dz[k] = d_i * i * (1.0 - i);
            dz[h + k] = d_f * f * (1.0 - f);
            dz[2 * h + k] = d_g * (1.0 - g * g);
            dz[3 * h + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc[k] * f;
        }
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        add_outer(&mut grad.w_ih, &dz, xs.row(t));
        add_outer(&mut grad.w_hh, &dz, h_prev);
        add_matvec_transposed(&p.w_ih, &dz, d_input.row_mut(t));
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        add_matvec_transposed(&p.w_hh, &dz, &mut dh_next);
    }
}
