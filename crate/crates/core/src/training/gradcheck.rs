//! Central finite-difference verification of the analytic gradients.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Real;
use crate::model::{classify_with_masks, DropoutMasks, Model};
use crate::par;
use crate::signal::Sequence;

use super::{backward_into, check_dataset, cross_entropy_logits, derive_seed, GradScope};

/// Acceptance threshold on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many scalars (uniformly sampled); `None` = all.
    pub max_params: Option<usize>,
    /// Seeds the dropout masks (pinned for the whole check) and subsampling.
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_params: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Worst relative error per parameter array.
    pub per_param: BTreeMap<String, f64>,
    pub checked: usize,
    /// Largest `|analytic − numeric|` over all checked scalars.
    pub max_abs_err: f64,
    /// The scalar with the largest relative error.
    pub worst: Option<WorstEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < GRADCHECK_TOLERANCE
    }
}

/// Checks every parameter with step `eps`.
pub fn grad_check<T: Real>(model: &Model<T>, batch: &[Sequence], eps: f64) -> Result<GradCheckReport> {
    grad_check_with(
        model,
        batch,
        &GradCheckOptions {
            eps,
            ..Default::default()
        },
    )
}

/// Compares `(L(θ+ε) − L(θ−ε)) / 2ε` with the analytic gradient of the
/// mean batch loss, dropout masks held fixed. The error per scalar is
/// `|a − n| / max(1e-12, |a| + |n|)`.
pub fn grad_check_with<T: Real>(
    model: &Model<T>,
    batch: &[Sequence],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if T::NAME != "f64" {
        return Err(Error::UnsupportedMode(format!(
            "gradient checking needs 64-bit precision, model is {}",
            T::NAME
        )));
    }
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(Error::arg(format!(
            "finite-difference step must be positive, got {}",
            opts.eps
        )));
    }
    let model: Model<f64> = model.cast();
    check_dataset(&model, batch)?;

    let masks: Vec<Option<DropoutMasks<f64>>> = batch
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (model.config().dropout_p > 0.0).then(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[i as u64]));
                DropoutMasks::draw(model.config(), s.len(), &mut rng)
            })
        })
        .collect();

    let mut analytic = model.params().zeros_like();
    for (seq, m) in batch.iter().zip(&masks) {
        let fwd = classify_with_masks(&model, seq, m.clone())?;
        let cache = fwd.cache.as_ref().unwrap();
        backward_into(&model, cache, seq.gesture_id as usize, GradScope::ALL, &mut analytic)?;
    }
    let n = batch.len() as f64;

    // (array index, element index, name)
    let views = analytic.visit();
    let mut coords: Vec<(usize, usize)> = views
        .iter()
        .enumerate()
        .flat_map(|(a, v)| (0..v.values.len()).map(move |e| (a, e)))
        .collect();
    if let Some(k) = opts.max_params.filter(|&k| k < coords.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[u64::MAX]));
        let mut picked: Vec<usize> = sample(&mut rng, coords.len(), k).into_vec();
        picked.sort_unstable();
        coords = picked.into_iter().map(|i| coords[i]).collect();
    }

    let batch_loss = |m: &Model<f64>| -> Result<f64> {
        let mut total = 0.0;
        for (seq, mk) in batch.iter().zip(&masks) {
            let fwd = classify_with_masks(m, seq, mk.clone())?;
            total += cross_entropy_logits(&fwd.logits, seq.gesture_id as usize)?;
        }
        Ok(total / n)
    };

    let numeric: Vec<Result<Vec<f64>>> = par::map_chunks(&coords, 64, |_, chunk| {
        let mut work = model.clone();
        let mut out = Vec::with_capacity(chunk.len());
        for &(a, e) in chunk {
            let original = work.params().visit()[a].values[e];
            work.params_mut().visit_mut()[a].values[e] = original + opts.eps;
            let plus = batch_loss(&work)?;
            work.params_mut().visit_mut()[a].values[e] = original - opts.eps;
            let minus = batch_loss(&work)?;
            work.params_mut().visit_mut()[a].values[e] = original;
            out.push((plus - minus) / (2.0 * opts.eps));
        }
        Ok(out)
    });

    let mut per_param = BTreeMap::new();
    let mut max_rel_err = 0.0f64;
    let mut max_abs_err = 0.0f64;
    let mut worst = None;
    let mut numeric_iter = coords.iter();
    for chunk in numeric {
        for num in chunk? {
            let &(a, e) = numeric_iter.next().unwrap();
            let ana = views[a].values[e] / n;
            let rel = (ana - num).abs() / (ana.abs() + num.abs()).max(1e-12);
            let slot = per_param.entry(views[a].name.clone()).or_insert(0.0f64);
            *slot = slot.max(rel);
            max_abs_err = max_abs_err.max((ana - num).abs());
            if rel > max_rel_err || worst.is_none() {
                max_rel_err = rel;
                worst = Some(WorstEntry {
                    name: views[a].name.clone(),
                    index: e,
                    analytic: ana,
                    numeric: num,
                });
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        per_param,
        checked: coords.len(),
        max_abs_err,
        worst,
    })
}
