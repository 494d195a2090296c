//! Loss, backpropagation, Adam and the two-stage training protocol.
//!
//! * Stage 1 ([`train_stage1`]): the adaptation layer stays frozen at
//!   identity and the classifier is trained from scratch on source data.
//! * Stage 2 ([`adapt_stage2`]): the classifier is frozen and only `(M, b)`
//!   is trained on target data.
//! * [`fine_tune`]: everything trainable; the supervised baseline.
//!
//! Within a minibatch, sequences are processed in fixed-size chunks (in
//! parallel with the `parallel` feature) and the chunk gradients are summed
//! in index order, so results do not depend on the thread count.

mod adam;
mod backward;
mod gradcheck;
mod loss;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{
    adam_step, sgd_step, AdamConfig, FreezeMask, OptimizerState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON,
    DEFAULT_LR,
};
pub use backward::{backward, backward_into, GradScope, Gradients};
pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions, GradCheckReport, WorstEntry, GRADCHECK_TOLERANCE};
pub use loss::{cross_entropy, cross_entropy_logits};

use crate::error::{Error, Result};
use crate::linalg::Real;
use crate::model::{classify_forward, Group, Mode, Model};
use crate::par;
use crate::signal::Sequence;

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 64;
/// Sequences per parallel work item inside a minibatch.
const CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Adapt,
    FineTune,
}

impl Stage {
    fn freeze<T: Real>(self, model: &Model<T>) -> FreezeMask {
        match self {
            Stage::Pretrain => FreezeMask::group(model, Group::Adaptation),
            Stage::Adapt => FreezeMask::group(model, Group::Classifier),
            Stage::FineTune => FreezeMask::none(model),
        }
    }

    fn scope(self) -> GradScope {
        match self {
            Stage::Pretrain => GradScope {
                adaptation: false,
                classifier: true,
            },
            Stage::Adapt => GradScope {
                adaptation: true,
                classifier: false,
            },
            Stage::FineTune => GradScope::ALL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage: Stage,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub optimizer: AdamConfig,
}

impl TrainConfig {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            seed: 0,
            shuffle: true,
            optimizer: AdamConfig::default(),
        }
    }

    pub fn epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn batch_size(mut self, batch: usize) -> Self {
        self.batch_size = batch;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn lr(mut self, lr: f64) -> Self {
        self.optimizer.lr = lr;
        self
    }

    /// Same hyper-parameters, different stage.
    pub fn with_stage(&self, stage: Stage) -> Self {
        Self { stage, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::arg("epochs and batch size must be at least 1"));
        }
        if !(self.optimizer.lr.is_finite() && self.optimizer.lr >= 0.0) {
            return Err(Error::arg("learning rate must be non-negative"));
        }
        Ok(())
    }
}

/// Per-epoch mean loss, training accuracy (percent) and wall-clock seconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub seconds: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        self.seconds.iter().sum::<f64>() / self.seconds.len().max(1) as f64
    }

    /// CSV with header `epoch,loss,train_acc,seconds`; epochs are 1-based.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "loss", "train_acc", "seconds"])?;
        for e in 0..self.epochs() {
            w.write_record([
                (e + 1).to_string(),
                self.loss[e].to_string(),
                self.accuracy[e].to_string(),
                self.seconds[e].to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// SplitMix64 over `base` and `parts`; gives every (epoch, batch, item) its
/// own dropout stream independent of scheduling.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

pub(crate) fn check_dataset<T: Real>(model: &Model<T>, data: &[Sequence]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    for s in data {
        if s.features() != model.features() {
            return Err(Error::shape(format!(
                "sequence has {} features, model expects {}",
                s.features(),
                model.features()
            )));
        }
        if s.gesture_id as usize >= model.gestures() {
            return Err(Error::arg(format!(
                "label {} outside 0..{}",
                s.gesture_id,
                model.gestures()
            )));
        }
        if s.is_empty() {
            return Err(Error::input("training set contains an empty sequence"));
        }
    }
    Ok(())
}

/// Stage 1: classifier from scratch, adaptation layer frozen at identity.
pub fn train_stage1<T: Real>(
    model: &Model<T>,
    source: &[Sequence],
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainHistory)> {
    if cfg.stage != Stage::Pretrain {
        return Err(Error::contract("train_stage1 needs a pretrain-stage config"));
    }
    if !model.adapt_is_identity() {
        return Err(Error::contract("stage 1 expects the adaptation layer at identity"));
    }
    run(model, source, cfg)
}

/// Stage 2: only `(M, b)` is trained; classifier parameters stay bitwise fixed.
pub fn adapt_stage2<T: Real>(
    model: &Model<T>,
    target: &[Sequence],
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainHistory)> {
    if cfg.stage != Stage::Adapt {
        return Err(Error::contract("adapt_stage2 needs an adapt-stage config"));
    }
    run(model, target, cfg)
}

/// Supervised fine-tuning of every parameter.
pub fn fine_tune<T: Real>(
    model: &Model<T>,
    target: &[Sequence],
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainHistory)> {
    if cfg.stage != Stage::FineTune {
        return Err(Error::contract("fine_tune needs a finetune-stage config"));
    }
    run(model, target, cfg)
}

/// Scalars trainable in `stage`.
pub fn trainable_count<T: Real>(model: &Model<T>, stage: Stage) -> usize {
    stage.freeze(model).trainable(model)
}

struct ChunkResult<T> {
    grads: Gradients<T>,
    loss: f64,
    correct: usize,
}

fn run<T: Real>(model: &Model<T>, data: &[Sequence], cfg: &TrainConfig) -> Result<(Model<T>, TrainHistory)> {
    cfg.validate()?;
    check_dataset(model, data)?;
    let mut model = model.clone();
    let freeze = cfg.stage.freeze(&model);
    let scope = cfg.stage.scope();
    let mut state = OptimizerState::new(&model, cfg.optimizer, freeze);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut shuffler);
        }
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let chunks = par::map_chunks(batch, CHUNK, |start, idxs| -> Result<ChunkResult<T>> {
                let mut out = ChunkResult {
                    grads: model.params().zeros_like(),
                    loss: 0.0,
                    correct: 0,
                };
                for (j, &i) in idxs.iter().enumerate() {
                    let seq = &data[i];
                    let label = seq.gesture_id as usize;
                    let seed = derive_seed(cfg.seed, &[epoch as u64, b as u64, (start + j) as u64]);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let fwd = classify_forward(&model, seq, Mode::Train, &mut rng)?;
                    out.loss += cross_entropy_logits(&fwd.logits, label)?.as_f64();
                    out.correct += usize::from(fwd.predicted() == label);
                    let cache = fwd.cache.as_ref().expect("train mode returns a cache");
                    backward_into(&model, cache, label, scope, &mut out.grads)?;
                }
                Ok(out)
            });
            let mut total: Option<Gradients<T>> = None;
            for c in chunks {
                let c = c?;
                loss_sum += c.loss;
                correct += c.correct;
                match &mut total {
                    None => total = Some(c.grads),
                    Some(t) => t.add_scaled(&c.grads, T::one()),
                }
            }
            let mut grads = total.expect("batch is non-empty");
            let inv = T::of(1.0 / batch.len() as f64);
            for p in grads.visit_mut() {
                p.values.iter_mut().for_each(|v| *v *= inv);
            }
            adam_step(&mut state, &mut model, &grads)?;
        }
        let n = data.len() as f64;
        history.loss.push(loss_sum / n);
        history.accuracy.push(100.0 * correct as f64 / n);
        history.seconds.push(started.elapsed().as_secs_f64());
        log::debug!(
            "{:?} epoch {}: loss {:.4} acc {:.1}%",
            cfg.stage,
            epoch + 1,
            loss_sum / n,
            100.0 * correct as f64 / n
        );
    }
    Ok((model, history))
}

/// Mean eval-mode (dropout-free) loss and full-batch gradient.
pub fn full_batch_gradient<T: Real>(model: &Model<T>, data: &[Sequence]) -> Result<(f64, Gradients<T>)> {
    check_dataset(model, data)?;
    let mut grads = model.params().zeros_like();
    let mut loss = 0.0;
    for seq in data {
        let fwd = crate::model::classify_with_masks(model, seq, None)?;
        let label = seq.gesture_id as usize;
        loss += cross_entropy_logits(&fwd.logits, label)?.as_f64();
        backward_into(model, fwd.cache.as_ref().unwrap(), label, GradScope::ALL, &mut grads)?;
    }
    let inv = T::of(1.0 / data.len() as f64);
    for p in grads.visit_mut() {
        p.values.iter_mut().for_each(|v| *v *= inv);
    }
    Ok((loss / data.len() as f64, grads))
}
