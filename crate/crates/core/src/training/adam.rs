use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Real;
use crate::model::{Group, Model};

use super::Gradients;

pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// One flag per parameter array (in [`crate::model::Params::visit`] order);
/// `true` means frozen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreezeMask(pub Vec<bool>);

impl FreezeMask {
    pub fn none<T: Real>(model: &Model<T>) -> Self {
        Self(vec![false; model.params().visit().len()])
    }

    /// Freezes every array belonging to `group`.
    pub fn group<T: Real>(model: &Model<T>, group: Group) -> Self {
        Self(model.params().visit().iter().map(|p| p.group == group).collect())
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.0.get(index).copied().unwrap_or(false)
    }

    /// Number of scalars left trainable under this mask.
    pub fn trainable<T: Real>(&self, model: &Model<T>) -> usize {
        model
            .params()
            .visit()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_frozen(*i))
            .map(|(_, p)| p.values.len())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Adam moments, step counter and freeze mask.
#[derive(Clone, Debug)]
pub struct OptimizerState<T = f64> {
    pub m: Gradients<T>,
    pub v: Gradients<T>,
    pub step: u64,
    pub config: AdamConfig,
    pub freeze: FreezeMask,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(model: &Model<T>, config: AdamConfig, freeze: FreezeMask) -> Self {
        Self {
            m: model.params().zeros_like(),
            v: model.params().zeros_like(),
            step: 0,
            config,
            freeze,
        }
    }
}

fn check_congruent<T: Real>(model: &Model<T>, grads: &Gradients<T>) -> Result<()> {
    let (a, b) = (model.params().visit(), grads.visit());
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.shape != y.shape) {
        return Err(Error::contract("gradients are not shape-congruent with the model"));
    }
    Ok(())
}

/// Bias-corrected Adam update of every unfrozen array. Frozen arrays and
/// their moments are not touched at all.
pub fn adam_step<T: Real>(state: &mut OptimizerState<T>, model: &mut Model<T>, grads: &Gradients<T>) -> Result<()> {
    check_congruent(model, grads)?;
    if state.freeze.0.len() != grads.visit().len() {
        return Err(Error::contract("freeze mask length does not match the model"));
    }
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let t = state.step as f64;
    let corr1 = T::of(1.0 - c.beta1.powf(t));
    let corr2 = T::of(1.0 - c.beta2.powf(t));
    let (lr, eps) = (T::of(c.lr), T::of(c.epsilon));

    let grads = grads.visit();
    let ms = state.m.visit_mut();
    let vs = state.v.visit_mut();
    let ps = model.params_mut().visit_mut();
    for (i, (((p, g), m), v)) in ps.into_iter().zip(grads).zip(ms).zip(vs).enumerate() {
        if state.freeze.is_frozen(i) {
            continue;
        }
        for (((pv, &gv), mv), vv) in p.values.iter_mut().zip(g.values).zip(m.values).zip(v.values) {
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let m_hat = *mv / corr1;
            let v_hat = *vv / corr2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Plain gradient descent `p ← p − lr·g` on unfrozen arrays.
pub fn sgd_step<T: Real>(model: &mut Model<T>, grads: &Gradients<T>, lr: f64, freeze: &FreezeMask) -> Result<()> {
    check_congruent(model, grads)?;
    let lr = T::of(lr);
    for (i, (p, g)) in model
        .params_mut()
        .visit_mut()
        .into_iter()
        .zip(grads.visit())
        .enumerate()
    {
        if freeze.is_frozen(i) {
            continue;
        }
        for (pv, &gv) in p.values.iter_mut().zip(g.values) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}
