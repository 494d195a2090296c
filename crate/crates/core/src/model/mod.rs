//! The two-stage network: per-timestep affine adaptation layer, stacked
//! recurrent classifier (LSTM by default, vanilla RNN optional), a hidden
//! fully-connected layer and a `G`-way softmax output.

mod cells;
pub mod checkpoint;
mod forward;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cells::{lstm_cell_gates, lstm_cell_step, rnn_cell_step, LstmStep};
pub use forward::{
    adapt_forward, classify_forward, classify_with_masks, softmax, DropoutMasks, Forward, ForwardCache, Mode,
};
pub(crate) use forward::{HeadCache, LayerCache, LstmCache, RnnCache};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};

/// Width of the hidden fully-connected head layer.
pub const DEFAULT_HEAD_UNITS: usize = 512;
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const DEFAULT_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Rnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    pub fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Architecture hyper-parameters; everything needed to rebuild a model's shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input channels `f`.
    pub features: usize,
    /// Recurrent width `h`.
    pub hidden: usize,
    /// Gesture count `G`.
    pub gestures: usize,
    pub layers: usize,
    pub head_units: usize,
    pub dropout_p: f64,
    pub cell: CellKind,
    pub head_activation: Activation,
}

impl ModelConfig {
    pub fn new(features: usize, hidden: usize, gestures: usize, layers: usize) -> Self {
        Self {
            features,
            hidden,
            gestures,
            layers,
            head_units: DEFAULT_HEAD_UNITS,
            dropout_p: DEFAULT_DROPOUT,
            cell: CellKind::Lstm,
            head_activation: Activation::Identity,
        }
    }

    pub fn with_head_units(mut self, units: usize) -> Self {
        self.head_units = units;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn with_cell(mut self, cell: CellKind) -> Self {
        self.cell = cell;
        self
    }

    pub fn with_head_activation(mut self, act: Activation) -> Self {
        self.head_activation = act;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("features", self.features),
            ("hidden", self.hidden),
            ("gestures", self.gestures),
            ("layers", self.layers),
            ("head_units", self.head_units),
        ] {
            if v == 0 {
                return Err(Error::arg(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::arg(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// `x' = M x + b` applied at every timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptParams<T = f64> {
    pub m: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> AdaptParams<T> {
    pub fn identity(f: usize) -> Self {
        Self {
            m: Matrix::identity(f),
            b: vec![T::zero(); f],
        }
    }

    pub fn features(&self) -> usize {
        self.b.len()
    }
}

/// Gate weights act on the concatenation `[h_{t-1}, x_t]`, so each matrix is
/// `h × (h + d)` with the recurrent block first.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams<T = f64> {
    pub w_f: Matrix<T>,
    pub w_i: Matrix<T>,
    pub w_c: Matrix<T>,
    pub w_o: Matrix<T>,
    pub b_f: Vec<T>,
    pub b_i: Vec<T>,
    pub b_c: Vec<T>,
    pub b_o: Vec<T>,
}

impl<T: Real> LstmLayerParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = Matrix::zeros(hidden, hidden + input);
        let b = vec![T::zero(); hidden];
        Self {
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_f.len()
    }

    pub fn input(&self) -> usize {
        self.w_f.cols() - self.hidden()
    }
}

/// Simple recurrent layer: `h_t = σ_h(w_h x_t + u_h h_{t-1} + b_n)`,
/// `y_t = σ_y(w_y h_t + b_y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnLayerParams<T = f64> {
    pub w_h: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_n: Vec<T>,
    pub w_y: Matrix<T>,
    pub b_y: Vec<T>,
    pub sigma_h: Activation,
    pub sigma_y: Activation,
}

impl<T: Real> RnnLayerParams<T> {
    pub fn zeros(hidden: usize, input: usize, output: usize) -> Self {
        Self {
            w_h: Matrix::zeros(hidden, input),
            u_h: Matrix::zeros(hidden, hidden),
            b_n: vec![T::zero(); hidden],
            w_y: Matrix::zeros(output, hidden),
            b_y: vec![T::zero(); output],
            sigma_h: Activation::Tanh,
            sigma_y: Activation::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T = f64> {
    Lstm(LstmLayerParams<T>),
    Rnn(RnnLayerParams<T>),
}

impl<T: Real> Layer<T> {
    pub fn output_width(&self) -> usize {
        match self {
            Layer::Lstm(p) => p.hidden(),
            Layer::Rnn(p) => p.b_y.len(),
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Layer::Lstm(p) => p.input(),
            Layer::Rnn(p) => p.w_h.cols(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Layer::Lstm(p) => Layer::Lstm(LstmLayerParams::zeros(p.hidden(), p.input())),
            Layer::Rnn(p) => {
                let mut z = RnnLayerParams::zeros(p.b_n.len(), p.w_h.cols(), p.b_y.len());
                z.sigma_h = p.sigma_h;
                z.sigma_y = p.sigma_y;
                Layer::Rnn(z)
            }
        }
    }
}

/// Hidden fully-connected layer followed by the `G`-way output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<T = f64> {
    pub w_fc: Matrix<T>,
    pub b_fc: Vec<T>,
    pub w_out: Matrix<T>,
    pub b_out: Vec<T>,
}

impl<T: Real> HeadParams<T> {
    pub fn zeros(input: usize, units: usize, gestures: usize) -> Self {
        Self {
            w_fc: Matrix::zeros(units, input),
            b_fc: vec![T::zero(); units],
            w_out: Matrix::zeros(gestures, units),
            b_out: vec![T::zero(); gestures],
        }
    }
}

/// Which side of the two-stage split a parameter array belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Adaptation,
    Classifier,
}

pub struct ParamRef<'a, T> {
    pub name: String,
    pub group: Group,
    pub shape: Vec<usize>,
    pub values: &'a [T],
}

pub struct ParamMut<'a, T> {
    pub name: String,
    pub group: Group,
    pub shape: Vec<usize>,
    pub values: &'a mut [T],
}

/// Every trainable array of the network. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T = f64> {
    pub adapt: AdaptParams<T>,
    pub layers: Vec<Layer<T>>,
    pub head: HeadParams<T>,
}

fn shape_vec((r, c): (usize, usize)) -> Vec<usize> {
    if c == 0 {
        vec![r]
    } else {
        vec![r, c]
    }
}

fn mk_ref<'a, T>(name: &str, group: Group, shape: (usize, usize), values: &'a [T]) -> ParamRef<'a, T> {
    ParamRef {
        name: name.to_string(),
        group,
        shape: shape_vec(shape),
        values,
    }
}

fn mk_mut<'a, T>(name: &str, group: Group, shape: (usize, usize), values: &'a mut [T]) -> ParamMut<'a, T> {
    ParamMut {
        name: name.to_string(),
        group,
        shape: shape_vec(shape),
        values,
    }
}

impl<T: Real> Params<T> {
    /// All parameter arrays in canonical (checkpoint) order.
    pub fn visit(&self) -> Vec<ParamRef<'_, T>> {
        let mut out = vec![
            mk_ref(
                "adapt.M",
                Group::Adaptation,
                self.adapt.m.shape(),
                self.adapt.m.as_slice(),
            ),
            mk_ref("adapt.b", Group::Adaptation, (self.adapt.b.len(), 0), &self.adapt.b),
        ];
        for (k, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Lstm(p) => {
                    for (n, w, b) in [
                        ("f", &p.w_f, &p.b_f),
                        ("i", &p.w_i, &p.b_i),
                        ("C", &p.w_c, &p.b_c),
                        ("o", &p.w_o, &p.b_o),
                    ] {
                        let g = Group::Classifier;
                        out.push(mk_ref(&format!("layer{k}.W_{n}"), g, w.shape(), w.as_slice()));
                        out.push(mk_ref(&format!("layer{k}.b_{n}"), g, (b.len(), 0), b));
                    }
                }
                Layer::Rnn(p) => {
                    for (n, w) in [("w_h", &p.w_h), ("u_h", &p.u_h)] {
                        out.push(mk_ref(
                            &format!("layer{k}.{n}"),
                            Group::Classifier,
                            w.shape(),
                            w.as_slice(),
                        ));
                    }
                    out.push(mk_ref(
                        &format!("layer{k}.b_n"),
                        Group::Classifier,
                        (p.b_n.len(), 0),
                        &p.b_n,
                    ));
                    out.push(mk_ref(
                        &format!("layer{k}.w_y"),
                        Group::Classifier,
                        p.w_y.shape(),
                        p.w_y.as_slice(),
                    ));
                    out.push(mk_ref(
                        &format!("layer{k}.b_y"),
                        Group::Classifier,
                        (p.b_y.len(), 0),
                        &p.b_y,
                    ));
                }
            }
        }
        let h = &self.head;
        out.push(mk_ref(
            "head.W_fc",
            Group::Classifier,
            h.w_fc.shape(),
            h.w_fc.as_slice(),
        ));
        out.push(mk_ref("head.b_fc", Group::Classifier, (h.b_fc.len(), 0), &h.b_fc));
        out.push(mk_ref(
            "head.W_out",
            Group::Classifier,
            h.w_out.shape(),
            h.w_out.as_slice(),
        ));
        out.push(mk_ref("head.b_out", Group::Classifier, (h.b_out.len(), 0), &h.b_out));
        out
    }

    /// Same order as [`Params::visit`].
    pub fn visit_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let adapt = &mut self.adapt;
        let m_shape = adapt.m.shape();
        let b_len = adapt.b.len();
        let mut out = vec![
            mk_mut("adapt.M", Group::Adaptation, m_shape, adapt.m.as_mut_slice()),
            mk_mut("adapt.b", Group::Adaptation, (b_len, 0), &mut adapt.b),
        ];
        for (k, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Lstm(p) => {
                    for (n, w, b) in [
                        ("f", &mut p.w_f, &mut p.b_f),
                        ("i", &mut p.w_i, &mut p.b_i),
                        ("C", &mut p.w_c, &mut p.b_c),
                        ("o", &mut p.w_o, &mut p.b_o),
                    ] {
                        let g = Group::Classifier;
                        let (ws, bl) = (w.shape(), b.len());
                        out.push(mk_mut(&format!("layer{k}.W_{n}"), g, ws, w.as_mut_slice()));
                        out.push(mk_mut(&format!("layer{k}.b_{n}"), g, (bl, 0), b));
                    }
                }
                Layer::Rnn(p) => {
                    let g = Group::Classifier;
                    let shapes = (p.w_h.shape(), p.u_h.shape(), p.b_n.len(), p.w_y.shape(), p.b_y.len());
                    out.push(mk_mut(&format!("layer{k}.w_h"), g, shapes.0, p.w_h.as_mut_slice()));
                    out.push(mk_mut(&format!("layer{k}.u_h"), g, shapes.1, p.u_h.as_mut_slice()));
                    out.push(mk_mut(&format!("layer{k}.b_n"), g, (shapes.2, 0), &mut p.b_n));
                    out.push(mk_mut(&format!("layer{k}.w_y"), g, shapes.3, p.w_y.as_mut_slice()));
                    out.push(mk_mut(&format!("layer{k}.b_y"), g, (shapes.4, 0), &mut p.b_y));
                }
            }
        }
        let h = &mut self.head;
        let shapes = (h.w_fc.shape(), h.b_fc.len(), h.w_out.shape(), h.b_out.len());
        let g = Group::Classifier;
        out.push(mk_mut("head.W_fc", g, shapes.0, h.w_fc.as_mut_slice()));
        out.push(mk_mut("head.b_fc", g, (shapes.1, 0), &mut h.b_fc));
        out.push(mk_mut("head.W_out", g, shapes.2, h.w_out.as_mut_slice()));
        out.push(mk_mut("head.b_out", g, (shapes.3, 0), &mut h.b_out));
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            adapt: AdaptParams {
                m: Matrix::zeros(self.adapt.m.rows(), self.adapt.m.cols()),
                b: vec![T::zero(); self.adapt.b.len()],
            },
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
            head: HeadParams::zeros(self.head.w_fc.cols(), self.head.b_fc.len(), self.head.b_out.len()),
        }
    }

    pub fn count(&self, group: Option<Group>) -> usize {
        self.visit()
            .iter()
            .filter(|p| group.is_none_or(|g| p.group == g))
            .map(|p| p.values.len())
            .sum()
    }

    /// `self += scale · other`, array by array.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (dst, src) in self.visit_mut().into_iter().zip(other.visit()) {
            for (d, &s) in dst.values.iter_mut().zip(src.values) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.visit().iter().all(|p| p.values.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        let mut out: Params<U> = self.zeros_like_as();
        for (dst, src) in out.visit_mut().into_iter().zip(self.visit()) {
            for (d, &s) in dst.values.iter_mut().zip(src.values) {
                *d = U::of(s.as_f64());
            }
        }
        out
    }

    fn zeros_like_as<U: Real>(&self) -> Params<U> {
        Params {
            adapt: AdaptParams {
                m: Matrix::zeros(self.adapt.m.rows(), self.adapt.m.cols()),
                b: vec![U::zero(); self.adapt.b.len()],
            },
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Lstm(p) => Layer::Lstm(LstmLayerParams::zeros(p.hidden(), p.input())),
                    Layer::Rnn(p) => {
                        let mut z = RnnLayerParams::zeros(p.b_n.len(), p.w_h.cols(), p.b_y.len());
                        z.sigma_h = p.sigma_h;
                        z.sigma_y = p.sigma_y;
                        Layer::Rnn(z)
                    }
                })
                .collect(),
            head: HeadParams::zeros(self.head.w_fc.cols(), self.head.b_fc.len(), self.head.b_out.len()),
        }
    }
}

/// A network plus its architecture. `generation` is bumped on every
/// mutable access so forward caches can detect that they went stale.
#[derive(Clone, Debug)]
pub struct Model<T = f64> {
    config: ModelConfig,
    params: Params<T>,
    generation: u64,
}

impl<T: Real> PartialEq for Model<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl<T: Real> Model<T> {
    /// Identity adaptation layer, Glorot-uniform classifier weights, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, h) = (config.features, config.hidden);
        let mut layers = Vec::with_capacity(config.layers);
        for k in 0..config.layers {
            let d = if k == 0 { f } else { h };
            layers.push(match config.cell {
                CellKind::Lstm => {
                    let mut p = LstmLayerParams::zeros(h, d);
                    for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
                        glorot(w, &mut rng);
                    }
                    Layer::Lstm(p)
                }
                CellKind::Rnn => {
                    let mut p = RnnLayerParams::zeros(h, d, h);
                    glorot(&mut p.w_h, &mut rng);
                    glorot(&mut p.u_h, &mut rng);
                    glorot(&mut p.w_y, &mut rng);
                    Layer::Rnn(p)
                }
            });
        }
        let mut head = HeadParams::zeros(h, config.head_units, config.gestures);
        glorot(&mut head.w_fc, &mut rng);
        glorot(&mut head.w_out, &mut rng);
        Ok(Self {
            params: Params {
                adapt: AdaptParams::identity(f),
                layers,
                head,
            },
            config,
            generation: 0,
        })
    }

    /// Wraps existing parameters after checking they match `config`.
    pub fn from_parts(config: ModelConfig, params: Params<T>) -> Result<Self> {
        config.validate()?;
        check_shapes(&config, &params)?;
        Ok(Self {
            config,
            params,
            generation: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        self.generation = self.generation.wrapping_add(1);
        &mut self.params
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn adapt(&self) -> &AdaptParams<T> {
        &self.params.adapt
    }

    pub fn features(&self) -> usize {
        self.config.features
    }

    pub fn gestures(&self) -> usize {
        self.config.gestures
    }

    /// Number of scalars in `group` (or all of them).
    pub fn param_count(&self, group: Option<Group>) -> usize {
        self.params.count(group)
    }

    pub fn set_dropout(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::arg(format!("dropout must lie in [0, 1), got {p}")));
        }
        self.config.dropout_p = p;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            generation: 0,
        }
    }

    /// Whether the adaptation layer is exactly `(I, 0)`.
    pub fn adapt_is_identity(&self) -> bool {
        self.params.adapt == AdaptParams::identity(self.config.features)
    }
}

/// `init_model` in functional form.
pub fn init_model(features: usize, hidden: usize, gestures: usize, layers: usize, seed: u64) -> Result<Model<f64>> {
    Model::init(ModelConfig::new(features, hidden, gestures, layers), seed)
}

fn glorot<T: Real>(w: &mut Matrix<T>, rng: &mut ChaCha8Rng) {
    let (fan_out, fan_in) = w.shape();
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in w.as_mut_slice() {
        *v = T::of(rng.gen_range(-limit..=limit));
    }
}

fn check_shapes<T: Real>(config: &ModelConfig, params: &Params<T>) -> Result<()> {
    let reference: Model<T> = Model::init(config.clone(), 0)?;
    let want = reference.params.visit();
    let got = params.visit();
    if want.len() != got.len() {
        return Err(Error::shape(format!(
            "expected {} parameter arrays, found {}",
            want.len(),
            got.len()
        )));
    }
    for (w, g) in want.iter().zip(&got) {
        if w.name != g.name || w.shape != g.shape {
            return Err(Error::shape(format!(
                "parameter {} has shape {:?}, expected {} with shape {:?}",
                g.name, g.shape, w.name, w.shape
            )));
        }
    }
    Ok(())
}
