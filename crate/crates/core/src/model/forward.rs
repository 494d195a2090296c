use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};
use crate::signal::Sequence;

use super::cells::{lstm_step_into, rnn_step_into, LstmStep};
use super::{AdaptParams, Layer, Model, ModelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active; a cache for backpropagation is returned.
    Train,
    /// Deterministic; no cache.
    Eval,
}

/// Inverted-dropout multipliers (`0` or `1/(1-p)`) for every layer output
/// sequence (`T × width`) and for the hidden head layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks<T> {
    pub layers: Vec<Matrix<T>>,
    pub head: Vec<T>,
}

impl<T: Real> DropoutMasks<T> {
    /// Draws fresh masks; layer masks first (row-major), then the head.
    pub fn draw<R: Rng + ?Sized>(config: &ModelConfig, steps: usize, rng: &mut R) -> Self {
        let p = config.dropout_p;
        let keep = T::of(1.0 / (1.0 - p));
        let mut bit = || if rng.gen::<f64>() < p { T::zero() } else { keep };
        let layers = (0..config.layers)
            .map(|_| {
                let mut m = Matrix::zeros(steps, config.hidden);
                m.as_mut_slice().iter_mut().for_each(|v| *v = bit());
                m
            })
            .collect();
        let head = (0..config.head_units).map(|_| bit()).collect();
        Self { layers, head }
    }

    /// Fraction of zeroed head units.
    pub fn head_drop_fraction(&self) -> f64 {
        self.head.iter().filter(|v| **v == T::zero()).count() as f64 / self.head.len().max(1) as f64
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LstmCache<T> {
    pub forget: Matrix<T>,
    pub input: Matrix<T>,
    pub candidate: Matrix<T>,
    pub output: Matrix<T>,
    pub c: Matrix<T>,
    pub h: Matrix<T>,
}

#[derive(Clone, Debug)]
pub(crate) struct RnnCache<T> {
    pub pre_h: Matrix<T>,
    pub h: Matrix<T>,
    pub pre_y: Matrix<T>,
    pub y: Matrix<T>,
}

#[derive(Clone, Debug)]
pub(crate) enum LayerCache<T> {
    Lstm(LstmCache<T>),
    Rnn(RnnCache<T>),
}

#[derive(Clone, Debug)]
pub(crate) struct HeadCache<T> {
    /// Masked top-layer output at the last timestep.
    pub input: Vec<T>,
    pub pre: Vec<T>,
    pub act: Vec<T>,
    /// `act` after dropout; what the output layer sees.
    pub dropped: Vec<T>,
}

/// Everything backpropagation needs from a train-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub(crate) raw: Matrix<T>,
    /// Input sequence of every recurrent layer; entry 0 is the adapted input.
    pub(crate) layer_inputs: Vec<Matrix<T>>,
    pub(crate) layers: Vec<LayerCache<T>>,
    pub(crate) head: HeadCache<T>,
    pub(crate) masks: Option<DropoutMasks<T>>,
    pub(crate) probs: Vec<T>,
    pub(crate) generation: u64,
    pub(crate) config: ModelConfig,
}

impl<T: Real> ForwardCache<T> {
    pub fn masks(&self) -> Option<&DropoutMasks<T>> {
        self.masks.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.raw.rows()
    }

    /// Rejects a cache produced by a different model state.
    pub(crate) fn check(&self, model: &Model<T>) -> Result<()> {
        if self.generation != model.generation() || &self.config != model.config() {
            return Err(Error::contract("forward cache was produced by a different model state"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    pub cache: Option<ForwardCache<T>>,
}

impl<T: Real> Forward<T> {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(z: &[T]) -> Result<Vec<T>> {
    if z.iter().any(|v| v.is_nan()) {
        return Err(Error::input("softmax input contains NaN"));
    }
    Ok(softmax_unchecked(z))
}

pub(crate) fn softmax_unchecked<T: Real>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row `t` of the result is `M x_t + b`.
pub fn adapt_forward<T: Real>(p: &AdaptParams<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    let f = p.features();
    if x.cols() != f {
        return Err(Error::shape(format!(
            "sequence has {} features, adaptation layer expects {f}",
            x.cols()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), f);
    for t in 0..x.rows() {
        let row = out.row_mut(t);
        p.m.matvec_into(x.row(t), row);
        for (o, &b) in row.iter_mut().zip(&p.b) {
            *o += b;
        }
    }
    Ok(out)
}

impl AdaptParams<f64> {
    /// [`adapt_forward`] on a [`Sequence`], keeping label and provenance.
    pub fn apply(&self, seq: &Sequence) -> Result<Sequence> {
        Ok(Sequence {
            data: adapt_forward(self, &seq.data)?,
            ..seq.clone()
        })
    }
}

fn check_sequence<T: Real>(model: &Model<T>, seq: &Sequence) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::input("cannot classify an empty sequence"));
    }
    if seq.features() != model.features() {
        return Err(Error::shape(format!(
            "sequence has {} features, model expects {}",
            seq.features(),
            model.features()
        )));
    }
    Ok(())
}

/// Full forward pass. Train mode draws dropout masks from `rng` and returns a
/// cache; eval mode ignores `rng`.
pub fn classify_forward<T: Real, R: Rng + ?Sized>(
    model: &Model<T>,
    seq: &Sequence,
    mode: Mode,
    rng: &mut R,
) -> Result<Forward<T>> {
    check_sequence(model, seq)?;
    match mode {
        Mode::Eval => Ok(run(model, seq.data.cast(), true, None, false)),
        Mode::Train => {
            let masks = (model.config().dropout_p > 0.0).then(|| DropoutMasks::draw(model.config(), seq.len(), rng));
            Ok(run(model, seq.data.cast(), true, masks, true))
        }
    }
}

/// Train-mode forward with caller-pinned masks (`None` = no dropout).
pub fn classify_with_masks<T: Real>(
    model: &Model<T>,
    seq: &Sequence,
    masks: Option<DropoutMasks<T>>,
) -> Result<Forward<T>> {
    check_sequence(model, seq)?;
    if let Some(m) = &masks {
        let c = model.config();
        if m.head.len() != c.head_units
            || m.layers.len() != c.layers
            || m.layers.iter().any(|l| l.shape() != (seq.len(), c.hidden))
        {
            return Err(Error::shape("dropout masks do not match model and sequence"));
        }
    }
    Ok(run(model, seq.data.cast(), true, masks, true))
}

impl<T: Real> Model<T> {
    /// Eval-mode logits and probabilities.
    pub fn predict(&self, seq: &Sequence) -> Result<Forward<T>> {
        check_sequence(self, seq)?;
        Ok(run(self, seq.data.cast(), true, None, false))
    }

    /// Eval-mode logits of the recurrent classifier alone, fed the raw
    /// sequence (adaptation layer bypassed).
    pub fn classifier_logits(&self, seq: &Sequence) -> Result<Vec<T>> {
        check_sequence(self, seq)?;
        Ok(run(self, seq.data.cast(), false, None, false).logits)
    }
}

fn run<T: Real>(
    model: &Model<T>,
    raw: Matrix<T>,
    adapt: bool,
    masks: Option<DropoutMasks<T>>,
    keep_cache: bool,
) -> Forward<T> {
    let params = model.params();
    let steps = raw.rows();
    let x0 = if adapt {
        adapt_forward(&params.adapt, &raw).expect("width checked by caller")
    } else {
        raw.clone()
    };

    let mut layer_inputs = Vec::with_capacity(params.layers.len() + 1);
    let mut caches = Vec::with_capacity(params.layers.len());
    layer_inputs.push(x0);
    for (k, layer) in params.layers.iter().enumerate() {
        let input = layer_inputs.last().unwrap();
        let (mut out, cache) = match layer {
            Layer::Lstm(p) => {
                let h = p.hidden();
                let mut cache = LstmCache {
                    forget: Matrix::zeros(steps, h),
                    input: Matrix::zeros(steps, h),
                    candidate: Matrix::zeros(steps, h),
                    output: Matrix::zeros(steps, h),
                    c: Matrix::zeros(steps, h),
                    h: Matrix::zeros(steps, h),
                };
                let mut step = LstmStep::zeros(h);
                let zeros = vec![T::zero(); h];
                for t in 0..steps {
                    let (h_prev, c_prev) = if t == 0 {
                        (&zeros[..], &zeros[..])
                    } else {
                        (cache.h.row(t - 1), cache.c.row(t - 1))
                    };
                    lstm_step_into(p, input.row(t), h_prev, c_prev, &mut step);
                    cache.forget.row_mut(t).copy_from_slice(&step.forget);
                    cache.input.row_mut(t).copy_from_slice(&step.input);
                    cache.candidate.row_mut(t).copy_from_slice(&step.candidate);
                    cache.output.row_mut(t).copy_from_slice(&step.output);
                    cache.c.row_mut(t).copy_from_slice(&step.c);
                    cache.h.row_mut(t).copy_from_slice(&step.h);
                }
                (cache.h.clone(), LayerCache::Lstm(cache))
            }
            Layer::Rnn(p) => {
                let (hd, kd) = (p.b_n.len(), p.b_y.len());
                let mut cache = RnnCache {
                    pre_h: Matrix::zeros(steps, hd),
                    h: Matrix::zeros(steps, hd),
                    pre_y: Matrix::zeros(steps, kd),
                    y: Matrix::zeros(steps, kd),
                };
                let zeros = vec![T::zero(); hd];
                let (mut ph, mut hh) = (vec![T::zero(); hd], vec![T::zero(); hd]);
                let (mut py, mut yy) = (vec![T::zero(); kd], vec![T::zero(); kd]);
                for t in 0..steps {
                    let h_prev = if t == 0 { &zeros[..] } else { cache.h.row(t - 1) };
                    rnn_step_into(p, input.row(t), h_prev, &mut ph, &mut hh, &mut py, &mut yy);
                    cache.pre_h.row_mut(t).copy_from_slice(&ph);
                    cache.h.row_mut(t).copy_from_slice(&hh);
                    cache.pre_y.row_mut(t).copy_from_slice(&py);
                    cache.y.row_mut(t).copy_from_slice(&yy);
                }
                (cache.y.clone(), LayerCache::Rnn(cache))
            }
        };
        if let Some(m) = &masks {
            for (o, &mv) in out.as_mut_slice().iter_mut().zip(m.layers[k].as_slice()) {
                *o *= mv;
            }
        }
        layer_inputs.push(out);
        caches.push(cache);
    }

    let top = layer_inputs.pop().unwrap();
    let head_in = top.row(steps - 1).to_vec();
    let hp = &params.head;
    let act_fn = model.config().head_activation;
    let mut pre = hp.w_fc.matvec(&head_in);
    for (a, &b) in pre.iter_mut().zip(&hp.b_fc) {
        *a += b;
    }
    let act: Vec<T> = pre.iter().map(|&a| act_fn.apply(a)).collect();
    let dropped: Vec<T> = match &masks {
        Some(m) => act.iter().zip(&m.head).map(|(&a, &mv)| a * mv).collect(),
        None => act.clone(),
    };
    let mut logits = hp.w_out.matvec(&dropped);
    for (l, &b) in logits.iter_mut().zip(&hp.b_out) {
        *l += b;
    }
    let probs = softmax_unchecked(&logits);

    let cache = keep_cache.then(|| ForwardCache {
        raw,
        layer_inputs,
        layers: caches,
        head: HeadCache {
            input: head_in,
            pre,
            act,
            dropped,
        },
        masks,
        probs: probs.clone(),
        generation: model.generation(),
        config: model.config().clone(),
    });
    Forward { logits, probs, cache }
}
