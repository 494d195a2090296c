//! Portable dataset format.
//!
//! A directory holds `manifest.json` and one blob per trial named
//! `s{subject}_e{session}_g{gesture}_t{trial}.bin`: little-endian IEEE-754
//! `f32` values, row-major (`frames × channels`). Every blob's SHA-256 is
//! listed in the manifest and verified on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::checkpoint::sha256_hex;
use crate::par;
use crate::signal::{Recording, RecordingKey};

pub const DATASET_FORMAT: &str = "myoshift-dataset";
pub const DATASET_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub subject: u32,
    pub session: u32,
    pub gesture: u32,
    pub trial: u32,
    pub frames: usize,
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub meta: DatasetMeta,
    pub recordings: Vec<TrialEntry>,
}

pub fn blob_name(key: &RecordingKey) -> String {
    format!(
        "s{}_e{}_g{}_t{}.bin",
        key.subject_id, key.session_id, key.gesture_id, key.trial_id
    )
}

fn encode(data: &Matrix<f64>) -> Vec<u8> {
    data.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

/// Writes `ds` into `dir` and returns the manifest path. Values are stored as
/// `f32`, so the round trip is exact for `f32`-representable data.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    let entries = par::map(&ds.recordings, |r| -> Result<TrialEntry> {
        let bytes = encode(&r.data);
        let file = blob_name(&r.key());
        fs::write(dir.join(&file), &bytes)?;
        Ok(TrialEntry {
            subject: r.subject_id,
            session: r.session_id,
            gesture: r.gesture_id,
            trial: r.trial_id,
            frames: r.frames(),
            file,
            sha256: sha256_hex(&bytes),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        meta: ds.meta.clone(),
        recordings: entries,
    };
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Loads and checksum-verifies a dataset. Accepts the manifest path or its
/// directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest_path = if manifest_path.is_dir() {
        manifest_path.join(MANIFEST_NAME)
    } else {
        manifest_path.to_path_buf()
    };
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path));
    }
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    if manifest.format != DATASET_FORMAT || manifest.version != DATASET_VERSION {
        return Err(Error::Format {
            path: manifest_path,
            reason: format!("unsupported dataset {} v{}", manifest.format, manifest.version),
        });
    }
    let dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let meta = manifest.meta.clone();
    let recordings = par::map(&manifest.recordings, |e| load_blob(&dir, e, &meta))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(manifest.meta, recordings)
}

fn load_blob(dir: &Path, e: &TrialEntry, meta: &DatasetMeta) -> Result<Recording> {
    let path = dir.join(&e.file);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let bytes = fs::read(&path)?;
    let found = sha256_hex(&bytes);
    if found != e.sha256 {
        return Err(Error::Checksum {
            path,
            expected: e.sha256.clone(),
            found,
        });
    }
    let values = bytes.len() / 4;
    if bytes.len() % 4 != 0 || meta.channels == 0 || values != e.frames * meta.channels {
        let width = if e.frames > 0 && bytes.len() % 4 == 0 && values % e.frames == 0 {
            (values / e.frames).to_string()
        } else {
            format!("{values} values over {} frames", e.frames)
        };
        return Err(Error::ChannelMismatch {
            path,
            expected: meta.channels,
            found: width,
        });
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let key = RecordingKey {
        subject_id: e.subject,
        session_id: e.session,
        gesture_id: e.gesture,
        trial_id: e.trial,
    };
    Recording::new(key, meta.rate_hz, Matrix::from_vec(e.frames, meta.channels, data)?)
}
