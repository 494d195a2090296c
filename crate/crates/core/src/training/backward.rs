//! Backpropagation through time for the adaptation layer, the recurrent
//! stack and the head.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};
use crate::model::{
    ForwardCache, HeadCache, Layer, LayerCache, LstmCache, LstmLayerParams, Model, Params, RnnCache, RnnLayerParams,
};

/// Per-parameter gradients share the parameter container's layout.
pub type Gradients<T = f64> = Params<T>;

/// Which gradient groups to accumulate. Frozen groups are skipped outright
/// rather than computed and discarded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradScope {
    pub adaptation: bool,
    pub classifier: bool,
}

impl GradScope {
    pub const ALL: Self = Self {
        adaptation: true,
        classifier: true,
    };
}

/// Exact gradients of the per-sequence cross-entropy loss.
pub fn backward<T: Real>(model: &Model<T>, cache: &ForwardCache<T>, label: usize) -> Result<Gradients<T>> {
    let mut grads = model.params().zeros_like();
    backward_into(model, cache, label, GradScope::ALL, &mut grads)?;
    Ok(grads)
}

/// Accumulates (adds) gradients into `grads` for the groups in `scope`.
pub fn backward_into<T: Real>(
    model: &Model<T>,
    cache: &ForwardCache<T>,
    label: usize,
    scope: GradScope,
    grads: &mut Gradients<T>,
) -> Result<()> {
    cache.check(model)?;
    let g = model.gestures();
    if label >= g {
        return Err(Error::arg(format!("label {label} outside 0..{g}")));
    }
    let params = model.params();
    let steps = cache.steps();

    // softmax + cross-entropy
    let mut d_logits = cache.probs.clone();
    d_logits[label] -= T::one();

    let head_mask = cache.masks().map(|m| &m.head[..]);
    let d_top = head_backward(model, &cache.head, head_mask, &d_logits, scope.classifier, grads);
    let top_width = d_top.len();
    let mut d_out = Matrix::zeros(steps, top_width);
    d_out.row_mut(steps - 1).copy_from_slice(&d_top);

    let n_layers = params.layers.len();
    for k in (0..n_layers).rev() {
        // gradient w.r.t. the masked output → unmasked output
        if let Some(m) = cache.masks() {
            for (d, &mv) in d_out.as_mut_slice().iter_mut().zip(m.layers[k].as_slice()) {
                *d *= mv;
            }
        }
        let need_input = k > 0 || scope.adaptation;
        if k == 0 && !need_input && !scope.classifier {
            break;
        }
        let input = &cache.layer_inputs[k];
        let d_in = match (&params.layers[k], &cache.layers[k], &mut grads.layers[k]) {
            (Layer::Lstm(p), LayerCache::Lstm(c), Layer::Lstm(gp)) => {
                lstm_backward(p, c, input, &d_out, need_input, scope.classifier, gp)
            }
            (Layer::Rnn(p), LayerCache::Rnn(c), Layer::Rnn(gp)) => {
                rnn_backward(p, c, input, &d_out, need_input, scope.classifier, gp)
            }
            _ => return Err(Error::contract("cache layer kinds do not match the model")),
        };
        d_out = d_in;
    }

    if scope.adaptation {
        // x'_t = M x_t + b  ⇒  dM = Σ_t δ_t x_tᵀ, db = Σ_t δ_t
        let ga = &mut grads.adapt;
        for t in 0..steps {
            let delta = d_out.row(t);
            ga.m.outer_acc(delta, cache.raw.row(t));
            for (b, &d) in ga.b.iter_mut().zip(delta) {
                *b += d;
            }
        }
    }
    Ok(())
}

/// Returns the gradient w.r.t. the head input (masked top-layer output at T).
fn head_backward<T: Real>(
    model: &Model<T>,
    head: &HeadCache<T>,
    head_mask: Option<&[T]>,
    d_logits: &[T],
    accumulate: bool,
    grads: &mut Gradients<T>,
) -> Vec<T> {
    let hp = &model.params().head;
    let act = model.config().head_activation;
    if accumulate {
        grads.head.w_out.outer_acc(d_logits, &head.dropped);
        for (b, &d) in grads.head.b_out.iter_mut().zip(d_logits) {
            *b += d;
        }
    }
    let mut d_act = vec![T::zero(); head.act.len()];
    hp.w_out.matvec_t_acc(d_logits, &mut d_act);
    if let Some(m) = head_mask {
        for (d, &mv) in d_act.iter_mut().zip(m) {
            *d *= mv;
        }
    }
    let d_pre: Vec<T> = d_act
        .iter()
        .zip(head.pre.iter().zip(&head.act))
        .map(|(&d, (&x, &y))| d * act.derivative(x, y))
        .collect();
    if accumulate {
        grads.head.w_fc.outer_acc(&d_pre, &head.input);
        for (b, &d) in grads.head.b_fc.iter_mut().zip(&d_pre) {
            *b += d;
        }
    }
    let mut d_in = vec![T::zero(); head.input.len()];
    hp.w_fc.matvec_t_acc(&d_pre, &mut d_in);
    d_in
}

fn lstm_backward<T: Real>(
    p: &LstmLayerParams<T>,
    c: &LstmCache<T>,
    input: &Matrix<T>,
    d_out: &Matrix<T>,
    need_input: bool,
    accumulate: bool,
    g: &mut LstmLayerParams<T>,
) -> Matrix<T> {
    let (steps, h) = c.h.shape();
    let mut d_in = Matrix::zeros(steps, input.cols());
    let zeros = vec![T::zero(); h];
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let mut da = [
        vec![T::zero(); h],
        vec![T::zero(); h],
        vec![T::zero(); h],
        vec![T::zero(); h],
    ];

    for t in (0..steps).rev() {
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (c.h.row(t - 1), c.c.row(t - 1))
        };
        let (fg, ig, gg, og, ct) = (
            c.forget.row(t),
            c.input.row(t),
            c.candidate.row(t),
            c.output.row(t),
            c.c.row(t),
        );
        let dout = d_out.row(t);
        for j in 0..h {
            let dh = dout[j] + dh_next[j];
            let tc = ct[j].tanh();
            let d_o = dh * tc;
            let dc = dc_next[j] + dh * og[j] * (T::one() - tc * tc);
            let d_f = dc * c_prev[j];
            let d_i = dc * gg[j];
            let d_g = dc * ig[j];
            dc_next[j] = dc * fg[j];
            da[0][j] = d_f * fg[j] * (T::one() - fg[j]);
            da[1][j] = d_i * ig[j] * (T::one() - ig[j]);
            da[2][j] = d_g * (T::one() - gg[j] * gg[j]);
            da[3][j] = d_o * og[j] * (T::one() - og[j]);
        }

        dh_next.iter_mut().for_each(|v| *v = T::zero());
        let x = input.row(t);
        let dx = d_in.row_mut(t);
        for (w, dak) in [&p.w_f, &p.w_i, &p.w_c, &p.w_o].into_iter().zip(&da) {
            for (row, &a) in w.row_iter().zip(dak) {
                if a == T::zero() {
                    continue;
                }
                for (dhn, &wv) in dh_next.iter_mut().zip(&row[..h]) {
                    *dhn += a * wv;
                }
                if need_input {
                    for (dxv, &wv) in dx.iter_mut().zip(&row[h..]) {
                        *dxv += a * wv;
                    }
                }
            }
        }

        if accumulate {
            let gw = [&mut g.w_f, &mut g.w_i, &mut g.w_c, &mut g.w_o];
            for (w, dak) in gw.into_iter().zip(&da) {
                for (r, &a) in dak.iter().enumerate().take(h) {
                    if a == T::zero() {
                        continue;
                    }
                    let row = w.row_mut(r);
                    for (wv, &hv) in row[..h].iter_mut().zip(h_prev) {
                        *wv += a * hv;
                    }
                    for (wv, &xv) in row[h..].iter_mut().zip(x) {
                        *wv += a * xv;
                    }
                }
            }
            for (b, dak) in [&mut g.b_f, &mut g.b_i, &mut g.b_c, &mut g.b_o].into_iter().zip(&da) {
                for (bv, &a) in b.iter_mut().zip(dak) {
                    *bv += a;
                }
            }
        }
    }
    d_in
}

fn rnn_backward<T: Real>(
    p: &RnnLayerParams<T>,
    c: &RnnCache<T>,
    input: &Matrix<T>,
    d_out: &Matrix<T>,
    need_input: bool,
    accumulate: bool,
    g: &mut RnnLayerParams<T>,
) -> Matrix<T> {
    let (steps, hd) = c.h.shape();
    let mut d_in = Matrix::zeros(steps, input.cols());
    let zeros = vec![T::zero(); hd];
    let mut dh_next = vec![T::zero(); hd];
    for t in (0..steps).rev() {
        let d_pre_y: Vec<T> = d_out
            .row(t)
            .iter()
            .zip(c.pre_y.row(t).iter().zip(c.y.row(t)))
            .map(|(&d, (&x, &y))| d * p.sigma_y.derivative(x, y))
            .collect();
        let mut dh = dh_next.clone();
        p.w_y.matvec_t_acc(&d_pre_y, &mut dh);
        let da: Vec<T> = dh
            .iter()
            .zip(c.pre_h.row(t).iter().zip(c.h.row(t)))
            .map(|(&d, (&x, &y))| d * p.sigma_h.derivative(x, y))
            .collect();
        let h_prev = if t == 0 { &zeros[..] } else { c.h.row(t - 1) };
        if accumulate {
            g.w_y.outer_acc(&d_pre_y, c.h.row(t));
            for (b, &d) in g.b_y.iter_mut().zip(&d_pre_y) {
                *b += d;
            }
            g.w_h.outer_acc(&da, input.row(t));
            g.u_h.outer_acc(&da, h_prev);
            for (b, &d) in g.b_n.iter_mut().zip(&da) {
                *b += d;
            }
        }
        if need_input {
            p.w_h.matvec_t_acc(&da, d_in.row_mut(t));
        }
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        p.u_h.matvec_t_acc(&da, &mut dh_next);
    }
    d_in
}
