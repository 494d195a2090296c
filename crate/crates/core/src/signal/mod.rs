//! Deterministic preprocessing of raw recordings.
//!
//! Every operation here is a pure function of its inputs and returns a new
//! [`Recording`]; nothing is modified in place.

mod filter;

use serde::{Deserialize, Serialize};

pub use filter::{BandStop, Biquad};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Standard deviations below this are treated as a constant channel.
pub const STD_FLOOR: f64 = 1e-12;

/// Sequences longer than this violate the real-time latency budget.
pub const REALTIME_LIMIT_MS: f64 = 300.0;

/// Identifies one trial of one gesture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordingKey {
    pub subject_id: u32,
    pub session_id: u32,
    pub gesture_id: u32,
    pub trial_id: u32,
}

/// One trial's multichannel time series (`N` frames × `f` channels).
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub subject_id: u32,
    pub session_id: u32,
    pub trial_id: u32,
    pub gesture_id: u32,
    pub rate_hz: f64,
    pub data: Matrix<f64>,
}

impl Recording {
    pub fn new(key: RecordingKey, rate_hz: f64, data: Matrix<f64>) -> Result<Self> {
        let rec = Self {
            subject_id: key.subject_id,
            session_id: key.session_id,
            trial_id: key.trial_id,
            gesture_id: key.gesture_id,
            rate_hz,
            data,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::input(format!("rate must be positive, got {}", self.rate_hz)));
        }
        if self.frames() == 0 || self.channels() == 0 {
            return Err(Error::input(format!(
                "recording must be non-empty, got {}x{}",
                self.frames(),
                self.channels()
            )));
        }
        if !self.data.is_finite() {
            return Err(Error::input("recording contains NaN or infinite values"));
        }
        Ok(())
    }

    pub fn key(&self) -> RecordingKey {
        RecordingKey {
            subject_id: self.subject_id,
            session_id: self.session_id,
            gesture_id: self.gesture_id,
            trial_id: self.trial_id,
        }
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.data.cols()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.row_iter().map(|r| r[c]).collect()
    }

    fn with_data(&self, data: Matrix<f64>) -> Self {
        Self { data, ..self.clone() }
    }

    /// Rebuilds the recording by transforming each channel independently.
    fn map_channels(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let (n, ch) = self.data.shape();
        let mut out = Matrix::zeros(n, ch);
        for c in 0..ch {
            let y = f(&self.channel(c));
            debug_assert_eq!(y.len(), n);
            for (t, v) in y.into_iter().enumerate() {
                out.set(t, c, v);
            }
        }
        self.with_data(out)
    }
}

/// Where a window came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub subject_id: u32,
    pub session_id: u32,
    pub trial_id: u32,
    pub window_index: u32,
}

/// Fixed-length window (`T` × `f`), the classifier's unit of input.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub data: Matrix<f64>,
    pub gesture_id: u32,
    pub provenance: Provenance,
}

impl Sequence {
    /// A sequence with dummy provenance.
    pub fn new(data: Matrix<f64>, gesture_id: u32) -> Self {
        Self {
            data,
            gesture_id,
            provenance: Provenance {
                subject_id: 0,
                session_id: 0,
                trial_id: 0,
                window_index: 0,
            },
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    #[inline]
    pub fn features(&self) -> usize {
        self.data.cols()
    }
}

/// Per-channel zero mean and unit sample standard deviation (N−1 denominator).
/// Channels whose standard deviation is below [`STD_FLOOR`] become all zeros.
pub fn standardize(rec: &Recording) -> Result<Recording> {
    let n = rec.frames();
    if n < 2 {
        return Err(Error::input(format!("standardize needs at least 2 frames, got {n}")));
    }
    Ok(rec.map_channels(|x| {
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if std < STD_FLOOR {
            vec![0.0; n]
        } else {
            x.iter().map(|v| (v - mean) / std).collect()
        }
    }))
}

pub fn rectify(rec: &Recording) -> Recording {
    rec.with_data(rec.data.map(f64::abs))
}

/// Centered moving average over `window_frames` (odd); the window shrinks to
/// the valid overlap at the edges.
pub fn smooth(rec: &Recording, window_frames: usize) -> Result<Recording> {
    if window_frames == 0 || window_frames.is_multiple_of(2) {
        return Err(Error::arg(format!(
            "smoothing window must be a positive odd frame count, got {window_frames}"
        )));
    }
    let half = window_frames / 2;
    Ok(rec.map_channels(|x| moving_average(x, half)))
}

fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(n);
            if half == 0 {
                x[t]
            } else {
                // direct sum keeps constant channels exactly constant
                x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            }
        })
        .collect()
}

/// Causal Butterworth band-stop applied to every channel from zero state.
pub fn bandstop_filter(rec: &Recording, low_hz: f64, high_hz: f64, order: usize) -> Result<Recording> {
    let filt = BandStop::design(low_hz, high_hz, order, rec.rate_hz)?;
    Ok(rec.map_channels(|x| filt.apply(x)))
}

/// Centered sub-recording of exactly `frames` rows. When the number of
/// dropped frames is odd, the extra one comes off the end.
pub fn extract_middle(rec: &Recording, frames: usize) -> Result<Recording> {
    let n = rec.frames();
    if frames == 0 || frames > n {
        return Err(Error::input(format!(
            "cannot extract {frames} middle frames from a {n}-frame recording"
        )));
    }
    let start = (n - frames) / 2;
    Ok(rec.with_data(rec.data.slice_rows(start, start + frames)))
}

/// Number of windows `segment` produces.
pub fn window_count(frames: usize, window: usize, stride: usize) -> usize {
    if window == 0 || stride == 0 || window > frames {
        0
    } else {
        (frames - window) / stride + 1
    }
}

/// Overlapped sliding windows: window `k` covers rows `k·stride .. k·stride + window`.
pub fn segment(rec: &Recording, window_frames: usize, stride_frames: usize) -> Result<Vec<Sequence>> {
    let n = rec.frames();
    if window_frames == 0 || window_frames > n {
        return Err(Error::input(format!(
            "window of {window_frames} frames does not fit a {n}-frame recording"
        )));
    }
    if stride_frames == 0 {
        return Err(Error::arg("stride must be at least one frame"));
    }
    let ms = window_frames as f64 * 1000.0 / rec.rate_hz;
    if ms > REALTIME_LIMIT_MS {
        log::warn!("{window_frames}-frame windows span {ms:.0} ms, above the {REALTIME_LIMIT_MS} ms real-time budget");
    }
    Ok((0..window_count(n, window_frames, stride_frames))
        .map(|k| {
            let start = k * stride_frames;
            Sequence {
                data: rec.data.slice_rows(start, start + window_frames),
                gesture_id: rec.gesture_id,
                provenance: Provenance {
                    subject_id: rec.subject_id,
                    session_id: rec.session_id,
                    trial_id: rec.trial_id,
                    window_index: k as u32,
                },
            }
        })
        .collect())
}

/// Converts a duration to a frame count at `rate_hz` (rounded, at least 1).
pub fn ms_to_frames(ms: f64, rate_hz: f64) -> usize {
    ((ms * rate_hz / 1000.0).round() as usize).max(1)
}

/// Ordered preprocessing chain: optional band-stop, then standardize →
/// rectify → smooth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    /// `(low_hz, high_hz, order)`; only for raw, unfiltered ingestion.
    pub bandstop: Option<(f64, f64, usize)>,
    pub standardize: bool,
    pub rectify: bool,
    /// Odd smoothing window in frames; `None` disables smoothing.
    pub smooth_frames: Option<usize>,
}

impl Pipeline {
    /// Default chain for a given sampling rate: ~11 ms smoothing window.
    pub fn for_rate(rate_hz: f64) -> Self {
        let mut w = ((0.011 * rate_hz).round() as usize).max(1);
        if w.is_multiple_of(2) {
            w += 1;
        }
        Self {
            bandstop: None,
            standardize: true,
            rectify: true,
            smooth_frames: Some(w),
        }
    }

    /// Pass-through.
    pub fn identity() -> Self {
        Self {
            bandstop: None,
            standardize: false,
            rectify: false,
            smooth_frames: None,
        }
    }

    pub fn apply(&self, rec: &Recording) -> Result<Recording> {
        let mut out = rec.clone();
        if let Some((lo, hi, order)) = self.bandstop {
            out = bandstop_filter(&out, lo, hi, order)?;
        }
        if self.standardize {
            out = standardize(&out)?;
        }
        if self.rectify {
            out = rectify(&out);
        }
        if let Some(w) = self.smooth_frames {
            out = smooth(&out, w)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(cols: &[&[f64]], rate: f64) -> Recording {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
        Recording::new(
            RecordingKey {
                subject_id: 0,
                session_id: 1,
                gesture_id: 2,
                trial_id: 3,
            },
            rate,
            Matrix::from_rows(&rows).unwrap(),
        )
        .unwrap()
    }

    fn ramp(n: usize) -> Recording {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        rec(&[&x], 1000.0)
    }

    #[test]
    fn standardize_small_channel() {
        // oracle: mean 2, sample std sqrt(((1)^2 + 0 + 1^2)/2) = 1
        let x = [1.0, 2.0, 3.0];
        let mean = x.iter().sum::<f64>() / 3.0;
        let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        let want: Vec<f64> = x.iter().map(|v| (v - mean) / std).collect();
        let out = standardize(&rec(&[&x], 1000.0)).unwrap();
        assert_eq!(out.channel(0), want);
        assert_eq!(want, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardize_fixed_point_and_guard() {
        let x = [-1.0, 0.0, 1.0];
        let out = standardize(&rec(&[&x, &[0.5, 0.5, 0.5]], 1000.0)).unwrap();
        for (a, b) in out.channel(0).iter().zip(x) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(out.channel(1), vec![0.0; 3]);
    }

    #[test]
    fn standardize_rejects_single_frame() {
        assert!(matches!(standardize(&ramp(1)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rectify_examples() {
        let out = rectify(&rec(&[&[-0.5, 0.25]], 1000.0));
        assert_eq!(out.channel(0), vec![0.5, 0.25]);
        let zeros = rec(&[&[0.0, 0.0]], 1000.0);
        assert_eq!(rectify(&zeros), zeros);
        let pos = rec(&[&[0.1, 3.0]], 1000.0);
        assert_eq!(rectify(&pos), pos);
    }

    #[test]
    fn smooth_shrinking_edges() {
        // hand-computed: (0+3)/2, (0+3+0)/3, (3+0+3)/3, (0+3+0)/3, (3+0)/2
        let out = smooth(&rec(&[&[0.0, 3.0, 0.0, 3.0, 0.0]], 1000.0), 3).unwrap();
        assert_eq!(out.channel(0), vec![1.5, 1.0, 2.0, 1.0, 1.5]);
    }

    #[test]
    fn smooth_identity_and_constant() {
        let r = ramp(7);
        assert_eq!(smooth(&r, 1).unwrap(), r);
        let c = rec(&[&[0.3; 9]], 1000.0);
        assert_eq!(smooth(&c, 5).unwrap(), c);
    }

    #[test]
    fn smooth_rejects_even_window() {
        assert!(matches!(smooth(&ramp(5), 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(smooth(&ramp(5), 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bandstop_passes_dc() {
        let r = rec(&[&[0.7; 3000]], 1000.0);
        let out = bandstop_filter(&r, 45.0, 55.0, 2).unwrap();
        let tail = out.channel(0)[2000..].to_vec();
        assert!(tail.iter().all(|v| (v / 0.7 - 1.0).abs() < 1e-3));
    }

    #[test]
    fn bandstop_kills_mains_tone() {
        let x: Vec<f64> = (0..4000)
            .map(|i| (2.0 * std::f64::consts::PI * 50.0 * i as f64 / 1000.0).sin())
            .collect();
        let out = bandstop_filter(&rec(&[&x], 1000.0), 45.0, 55.0, 2).unwrap();
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        let ratio = rms(&out.channel(0)[3000..]) / rms(&x[3000..]);
        assert!(ratio <= 0.1, "residual amplitude ratio {ratio}");
    }

    #[test]
    fn bandstop_rejects_band_above_nyquist() {
        let r = ramp(10);
        assert!(bandstop_filter(&Recording { rate_hz: 100.0, ..r }, 45.0, 55.0, 2).is_err());
    }

    #[test]
    fn middle_window() {
        let r = ramp(10);
        let out = extract_middle(&r, 4).unwrap();
        assert_eq!(out.channel(0), vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(extract_middle(&ramp(1000), 1000).unwrap(), ramp(1000));
        assert_eq!(extract_middle(&ramp(180), 180).unwrap(), ramp(180));
        assert!(extract_middle(&r, 11).is_err());
    }

    #[test]
    fn segment_counts_and_provenance() {
        let seqs = segment(&ramp(1000), 150, 75).unwrap();
        assert_eq!(seqs.len(), 12);
        assert_eq!(seqs[3].data.get(0, 0), 225.0);
        assert_eq!(seqs[3].provenance.window_index, 3);
        assert_eq!(seqs[3].provenance.trial_id, 3);
        assert!(seqs.iter().all(|s| s.gesture_id == 2 && s.len() == 150));

        let whole = segment(&ramp(40), 40, 7).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].data, ramp(40).data);

        assert!(segment(&ramp(100), 150, 75).is_err());
        assert!(segment(&ramp(100), 10, 0).is_err());
    }

    #[test]
    fn default_pipeline_windows() {
        assert_eq!(Pipeline::for_rate(1000.0).smooth_frames, Some(11));
        assert_eq!(Pipeline::for_rate(100.0).smooth_frames, Some(1));
        assert_eq!(Pipeline::for_rate(200.0).smooth_frames, Some(3));
        assert_eq!(ms_to_frames(150.0, 1000.0), 150);
        assert_eq!(ms_to_frames(400.0, 100.0), 40);
    }

    #[test]
    fn recording_rejects_nan() {
        let key = ramp(2).key();
        let m = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(Recording::new(key, 1000.0, m).is_err());
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(Recording::new(key, 0.0, m).is_err());
    }
}
