//! Synthetic gesture recordings with a known, invertible domain shift.
//!
//! Each gesture drives its own sparse subset of channels with a smooth
//! rise-hold-fall envelope; white noise is added on top. Because the
//! generated values are already envelope-level features, the resulting
//! datasets are marked as preprocessed. A [`ShiftSpec`] then maps every
//! frame through `x ↦ A x + c`, which stage 2 can undo exactly.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::linalg::{determinant, invert, Matrix};
use crate::par;
use crate::signal::{Recording, RecordingKey};
use crate::training::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    /// Fraction of the trial spent rising (and, symmetrically, falling).
    pub ramp_fraction: f64,
    /// Envelope level at the start and end of a trial, relative to the hold.
    pub floor: f64,
    /// Channels activated by each gesture.
    pub active_channels: usize,
    /// Peak amplitudes are drawn from this range.
    pub amplitude: (f64, f64),
    /// Relative per-subject amplitude jitter.
    pub subject_jitter: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self {
            ramp_fraction: 0.2,
            floor: 0.4,
            active_channels: 2,
            amplitude: (0.6, 1.0),
            subject_jitter: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub gestures: usize,
    pub channels: usize,
    pub subjects: usize,
    pub sessions: usize,
    pub trials: usize,
    pub frames: usize,
    pub rate_hz: f64,
    pub noise_std: f64,
    pub envelope: EnvelopeSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            gestures: 5,
            channels: 8,
            subjects: 3,
            sessions: 2,
            trials: 10,
            frames: 400,
            rate_hz: 200.0,
            noise_std: 0.1,
            envelope: EnvelopeSpec::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gestures", self.gestures),
            ("channels", self.channels),
            ("subjects", self.subjects),
            ("sessions", self.sessions),
            ("trials", self.trials),
            ("frames", self.frames),
        ] {
            if v == 0 {
                return Err(Error::arg(format!("synthetic {name} must be at least 1")));
            }
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::arg("synthetic rate must be positive"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::arg("noise_std must be non-negative"));
        }
        let e = &self.envelope;
        if e.active_channels == 0 || e.active_channels > self.channels {
            return Err(Error::arg(format!("active channels must lie in 1..={}", self.channels)));
        }
        if !(0.0..=0.5).contains(&e.ramp_fraction) || !(0.0..=1.0).contains(&e.floor) {
            return Err(Error::arg("ramp fraction must lie in [0, 0.5] and floor in [0, 1]"));
        }
        if !(e.amplitude.0 > 0.0 && e.amplitude.0 <= e.amplitude.1) {
            return Err(Error::arg("amplitude range must be positive and ordered"));
        }
        let subsets = binomial(self.channels, e.active_channels);
        if subsets < self.gestures as f64 {
            return Err(Error::arg(format!(
                "{} gestures cannot get distinct {}-of-{} channel subsets",
                self.gestures, e.active_channels, self.channels
            )));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Envelope value at frame `t` of `n`: raised-cosine rise, flat hold,
/// raised-cosine fall, never below `floor`.
fn envelope(t: usize, n: usize, spec: &EnvelopeSpec) -> f64 {
    let u = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.5 };
    let r = spec.ramp_fraction;
    let shape = if r == 0.0 || (r..=1.0 - r).contains(&u) {
        1.0
    } else if u < r {
        0.5 * (1.0 - (PI * u / r).cos())
    } else {
        0.5 * (1.0 - (PI * (1.0 - u) / r).cos())
    };
    spec.floor + (1.0 - spec.floor) * shape
}

/// Deterministic dataset for `seed`; values are rounded to `f32` so the
/// portable format stores them losslessly.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let (g_count, f) = (spec.gestures, spec.channels);
    let env = &spec.envelope;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5e_ed]));

    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(g_count);
    let channels: Vec<usize> = (0..f).collect();
    while subsets.len() < g_count {
        let mut pick: Vec<usize> = channels
            .choose_multiple(&mut rng, env.active_channels)
            .copied()
            .collect();
        pick.sort_unstable();
        if !subsets.contains(&pick) {
            subsets.push(pick);
        }
    }
    let base: Vec<Vec<f64>> = subsets
        .iter()
        .map(|subset| {
            let mut amp = vec![0.0; f];
            for &c in subset {
                amp[c] = rng.gen_range(env.amplitude.0..=env.amplitude.1);
            }
            amp
        })
        .collect();
    let patterns: Vec<Vec<Vec<f64>>> = (0..spec.subjects)
        .map(|_| {
            base.iter()
                .map(|amp| {
                    amp.iter()
                        .map(|&a| a * (1.0 + env.subject_jitter * rng.gen_range(-1.0..=1.0)))
                        .collect()
                })
                .collect()
        })
        .collect();
    let shape: Vec<f64> = (0..spec.frames).map(|t| envelope(t, spec.frames, env)).collect();

    let mut keys = Vec::new();
    for s in 0..spec.subjects as u32 {
        for e in 1..=spec.sessions as u32 {
            for g in 0..g_count as u32 {
                for t in 1..=spec.trials as u32 {
                    keys.push(RecordingKey {
                        subject_id: s,
                        session_id: e,
                        gesture_id: g,
                        trial_id: t,
                    });
                }
            }
        }
    }
    let recordings = par::map(&keys, |key| {
        let pattern = &patterns[key.subject_id as usize][key.gesture_id as usize];
        let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &[
                key.subject_id as u64,
                key.session_id as u64,
                key.gesture_id as u64,
                key.trial_id as u64,
            ],
        ));
        let mut data = Matrix::zeros(spec.frames, f);
        for (t, &level) in shape.iter().enumerate() {
            for (c, &amp) in pattern.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut noise);
                data.set(t, c, (amp * level + spec.noise_std * z) as f32 as f64);
            }
        }
        Recording::new(*key, spec.rate_hz, data)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Dataset::new(
        DatasetMeta {
            name: format!("synthetic-{seed}"),
            rate_hz: spec.rate_hz,
            channels: f,
            gestures: g_count,
            subjects: spec.subjects,
            sessions: spec.sessions,
            trials: spec.trials,
            preprocessed: true,
        },
        recordings,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Rotation,
    Permutation,
    Random,
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(Self::Rotation),
            "permutation" => Ok(Self::Permutation),
            "random" | "random-invertible" => Ok(Self::Random),
            other => Err(Error::arg(format!("unknown shift kind {other}"))),
        }
    }
}

/// Ground-truth affine shift `x ↦ A x + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSpec {
    pub a: Matrix<f64>,
    pub c: Vec<f64>,
    pub kind: ShiftKind,
}

impl ShiftSpec {
    pub fn identity(f: usize) -> Self {
        Self {
            a: Matrix::identity(f),
            c: vec![0.0; f],
            kind: ShiftKind::Random,
        }
    }

    /// `x ↦ A⁻¹ (x − c)`.
    pub fn inverse(&self) -> Result<Self> {
        let a = invert(&self.a)?;
        let c = a.matvec(&self.c).into_iter().map(|v| -v).collect();
        Ok(Self { a, c, kind: self.kind })
    }

    pub fn apply_frame(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.a.matvec(x);
        for (v, &c) in y.iter_mut().zip(&self.c) {
            *v += c;
        }
        y
    }
}

/// Random shift of the given kind on `f ≥ 2` channels.
pub fn make_shift(kind: ShiftKind, f: usize, seed: u64) -> Result<ShiftSpec> {
    if f < 2 {
        return Err(Error::arg(format!("a domain shift needs at least 2 channels, got {f}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5_41f7]));
    let a = match kind {
        ShiftKind::Rotation => {
            let mut a = Matrix::<f64>::identity(f);
            for i in 0..f {
                for j in i + 1..f {
                    let theta = rng.gen_range(-PI..PI);
                    let (s, c) = theta.sin_cos();
                    // left-multiply by the Givens rotation in the (i, j) plane
                    for col in 0..f {
                        let (ai, aj) = (a.get(i, col), a.get(j, col));
                        a.set(i, col, c * ai - s * aj);
                        a.set(j, col, s * ai + c * aj);
                    }
                }
            }
            a
        }
        ShiftKind::Permutation => {
            let identity: Vec<usize> = (0..f).collect();
            let mut perm = identity.clone();
            while perm == identity {
                perm.shuffle(&mut rng);
            }
            let mut a = Matrix::zeros(f, f);
            for (row, &col) in perm.iter().enumerate() {
                a.set(row, col, 1.0);
            }
            a
        }
        ShiftKind::Random => loop {
            let mut a = Matrix::<f64>::identity(f);
            for v in a.as_mut_slice() {
                *v += 0.3 * rng.gen_range(-1.0..1.0);
            }
            if determinant(&a).abs() > 1e-3 {
                break a;
            }
        },
    };
    let c = match kind {
        ShiftKind::Random => (0..f).map(|_| 0.1 * rng.gen_range(-1.0..1.0)).collect(),
        _ => vec![0.0; f],
    };
    Ok(ShiftSpec { a, c, kind })
}

/// Optional fresh noise added after the shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftNoise {
    pub seed: u64,
    pub std: f64,
}

/// Maps every frame through the shift and marks the result as a new
/// session (`session_id + 1`).
pub fn apply_domain_shift(ds: &Dataset, shift: &ShiftSpec, noise: Option<ShiftNoise>) -> Result<Dataset> {
    let f = ds.meta.channels;
    if shift.a.shape() != (f, f) || shift.c.len() != f {
        return Err(Error::shape(format!(
            "shift is {}x{} with offset {}, dataset has {f} channels",
            shift.a.rows(),
            shift.a.cols(),
            shift.c.len()
        )));
    }
    let recordings = par::map(&ds.recordings, |r| {
        let mut rng = noise.map(|n| {
            let k = r.key();
            let parts = [k.subject_id, k.session_id, k.gesture_id, k.trial_id].map(u64::from);
            (ChaCha8Rng::seed_from_u64(derive_seed(n.seed, &parts)), n.std)
        });
        let mut data = Matrix::zeros(r.frames(), f);
        for t in 0..r.frames() {
            let mut y = shift.apply_frame(r.data.row(t));
            if let Some((rng, std)) = rng.as_mut() {
                for v in y.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += *std * z;
                }
            }
            data.row_mut(t).copy_from_slice(&y);
        }
        Recording {
            session_id: r.session_id + 1,
            data,
            ..r.clone()
        }
    });
    let mut meta = ds.meta.clone();
    meta.name = format!("{}-shifted", ds.meta.name);
    Dataset::new(meta, recordings)
}
