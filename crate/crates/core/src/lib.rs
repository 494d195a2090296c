//! Two-stage recurrent domain adaptation for surface-EMG gesture recognition.
//!
//! A linear per-timestep adaptation layer (`x' = M x + b`) sits in front of a
//! stacked LSTM sequence classifier. The classifier is trained on source data
//! with the adaptation layer frozen at identity; afterwards only `(M, b)` is
//! trained on the target domain.
//!
//! Module map:
//!
//! * [`signal`]: standardize / rectify / smooth, Butterworth band-stop,
//!   middle-window extraction and overlapped segmentation.
//! * [`model`]: adaptation layer, LSTM and vanilla RNN cells, head, checkpoints.
//! * [`training`]: loss, BPTT, Adam, two-stage protocol, fine-tuning, gradient checks.
//! * [`data`]: portable on-disk dataset format and evaluation splits.
//! * [`synth`]: synthetic gesture data with a known invertible domain shift.
//! * [`eval`]: accuracy, the three adaptation scenarios and the data-budget sweep.

pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod par;
pub mod signal;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use linalg::{Matrix, Real};
