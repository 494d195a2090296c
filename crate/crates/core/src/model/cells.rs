use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid, Matrix, Real};

use super::{LstmLayerParams, RnnLayerParams};

/// All intermediate values of one LSTM timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStep<T> {
    pub forget: Vec<T>,
    pub input: Vec<T>,
    pub candidate: Vec<T>,
    pub output: Vec<T>,
    pub c: Vec<T>,
    pub h: Vec<T>,
}

/// `W · [h_prev, x] + b` for a gate matrix laid out recurrent-block first.
#[inline]
pub(crate) fn gate_affine<T: Real>(w: &Matrix<T>, b: &[T], h_prev: &[T], x: &[T], out: &mut [T]) {
    let h = h_prev.len();
    for ((o, row), &bias) in out.iter_mut().zip(w.row_iter()).zip(b) {
        *o = bias + dot(&row[..h], h_prev) + dot(&row[h..], x);
    }
}

/// Unchecked LSTM step writing into caller buffers.
#[inline]
pub(crate) fn lstm_step_into<T: Real>(
    p: &LstmLayerParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    step: &mut LstmStep<T>,
) {
    gate_affine(&p.w_f, &p.b_f, h_prev, x, &mut step.forget);
    gate_affine(&p.w_i, &p.b_i, h_prev, x, &mut step.input);
    gate_affine(&p.w_c, &p.b_c, h_prev, x, &mut step.candidate);
    gate_affine(&p.w_o, &p.b_o, h_prev, x, &mut step.output);
    for (j, &cp) in c_prev.iter().enumerate().take(h_prev.len()) {
        let f = sigmoid(step.forget[j]);
        let i = sigmoid(step.input[j]);
        let g = step.candidate[j].tanh();
        let o = sigmoid(step.output[j]);
        let c = f * cp + i * g;
        step.forget[j] = f;
        step.input[j] = i;
        step.candidate[j] = g;
        step.output[j] = o;
        step.c[j] = c;
        step.h[j] = o * c.tanh();
    }
}

impl<T: Real> LstmStep<T> {
    pub(crate) fn zeros(h: usize) -> Self {
        let z = vec![T::zero(); h];
        Self {
            forget: z.clone(),
            input: z.clone(),
            candidate: z.clone(),
            output: z.clone(),
            c: z.clone(),
            h: z,
        }
    }
}

/// One LSTM timestep with every gate exposed.
pub fn lstm_cell_gates<T: Real>(p: &LstmLayerParams<T>, x_t: &[T], h_prev: &[T], c_prev: &[T]) -> Result<LstmStep<T>> {
    let h = p.hidden();
    if x_t.len() != p.input() || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::shape(format!(
            "lstm step expects x of {}, h and c of {h}; got {}, {}, {}",
            p.input(),
            x_t.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut step = LstmStep::zeros(h);
    lstm_step_into(p, x_t, h_prev, c_prev, &mut step);
    Ok(step)
}

/// One LSTM timestep: returns `(h_t, c_t)`.
pub fn lstm_cell_step<T: Real>(
    p: &LstmLayerParams<T>,
    x_t: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let s = lstm_cell_gates(p, x_t, h_prev, c_prev)?;
    Ok((s.h, s.c))
}

/// Unchecked vanilla RNN step. `pre_h`/`pre_y` receive pre-activations.
#[inline]
pub(crate) fn rnn_step_into<T: Real>(
    p: &RnnLayerParams<T>,
    x: &[T],
    h_prev: &[T],
    pre_h: &mut [T],
    h: &mut [T],
    pre_y: &mut [T],
    y: &mut [T],
) {
    p.w_h.matvec_into(x, pre_h);
    for ((a, row), &b) in pre_h.iter_mut().zip(p.u_h.row_iter()).zip(&p.b_n) {
        *a += dot(row, h_prev) + b;
    }
    for (hj, &a) in h.iter_mut().zip(pre_h.iter()) {
        *hj = p.sigma_h.apply(a);
    }
    p.w_y.matvec_into(h, pre_y);
    for ((yk, a), &b) in y.iter_mut().zip(pre_y.iter_mut()).zip(&p.b_y) {
        *a += b;
        *yk = p.sigma_y.apply(*a);
    }
}

/// One simple-recurrent timestep: returns `(h_t, y_t)`.
pub fn rnn_cell_step<T: Real>(p: &RnnLayerParams<T>, x_t: &[T], h_prev: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let (hd, kd) = (p.b_n.len(), p.b_y.len());
    if x_t.len() != p.w_h.cols() || h_prev.len() != hd {
        return Err(Error::shape(format!(
            "rnn step expects x of {} and h of {hd}; got {} and {}",
            p.w_h.cols(),
            x_t.len(),
            h_prev.len()
        )));
    }
    let (mut pre_h, mut h) = (vec![T::zero(); hd], vec![T::zero(); hd]);
    let (mut pre_y, mut y) = (vec![T::zero(); kd], vec![T::zero(); kd]);
    rnn_step_into(p, x_t, h_prev, &mut pre_h, &mut h, &mut pre_y, &mut y);
    Ok((h, y))
}
